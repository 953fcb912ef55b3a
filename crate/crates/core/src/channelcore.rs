//! Decoherence functions, single generalized Pauli dephasing channels and
//! their convex mixtures.
//!
//! A channel with basis label α and decoherence function p acts as
//!
//! ```text
//! E(ρ) = (1 − p) ρ + p/(d − 1) Σ_{k=1}^{d−1} U_α^k ρ U_α^{k†}
//! ```
//!
//! which is diagonal on the operators `U_β^m`: eigenvalue 1 for β = α and
//! `1 − d/(d − 1) · p` otherwise. For d = 2 this is the Pauli channel
//! `(1 − p) ρ + p σ ρ σ`.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::TimeGrid;
use crate::exprcalc::{self, DomainError, Dual, Expr, ParseError};
use crate::mubgen::{self, MubError};
use crate::roots::bisect;

/// Tolerance on Σx = 1.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Tolerance on |p(0)| for non-closed-form decoherence functions.
pub const ORIGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("t = {t} lies outside the sampled range [{start}, {end}]")]
    OutsideSamples { t: f64, start: f64, end: f64 },
}

impl EvalError {
    pub fn time(&self) -> f64 {
        match self {
            EvalError::Domain(e) => e.t,
            EvalError::OutsideSamples { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("need at least two samples, got {0}")]
    TooFew(usize),
    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
    #[error("sample times must be strictly ascending (index {0})")]
    NotAscending(usize),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

/// Monotone (Fritsch–Carlson) cubic Hermite interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, SampleError> {
        if times.len() != values.len() {
            return Err(SampleError::LengthMismatch {
                times: times.len(),
                values: values.len(),
            });
        }
        let n = times.len();
        if n < 2 {
            return Err(SampleError::TooFew(n));
        }
        if let Some(i) = (0..n).find(|&i| !times[i].is_finite() || !values[i].is_finite()) {
            return Err(SampleError::NonFinite(i));
        }
        if let Some(i) = (1..n).find(|&i| times[i] <= times[i - 1]) {
            return Err(SampleError::NotAscending(i));
        }
        let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1)
            .map(|k| (values[k + 1] - values[k]) / h[k])
            .collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = delta[0];
            slopes[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                let (d0, d1) = (delta[k - 1], delta[k]);
                if d0 * d1 > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    slopes[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
                }
            }
            slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(MonotoneCubic {
            times,
            values,
            slopes,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval_dual(&self, t: f64) -> Result<Dual, EvalError> {
        let (start, end) = (self.times[0], *self.times.last().unwrap());
        if !(t >= start && t <= end) {
            return Err(EvalError::OutsideSamples { t, start, end });
        }
        let k = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            i => (i - 1).min(self.times.len() - 2),
        };
        let h = self.times[k + 1] - self.times[k];
        let s = (t - self.times[k]) / h;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let value = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        let dvalue = (6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1;
        Ok(Dual::new(value, dvalue / h))
    }
}

// three-point end slope, clipped to preserve shape
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// Time-dependent decoherence function p(t).
#[derive(Debug, Clone, PartialEq)]
pub enum DecoherenceFunction {
    /// `scale · (1 − e^{−rate·t})`
    ExpRelax { scale: f64, rate: f64 },
    Expression { source: String, ast: Expr },
    SampledGrid(MonotoneCubic),
    /// `scale · (1 − e^{−rate·t}) + coeff · inner(t)`; used to complete an
    /// arbitrary function into a semigroup-yielding partner.
    Affine {
        scale: f64,
        rate: f64,
        coeff: f64,
        inner: Box<DecoherenceFunction>,
    },
}

impl DecoherenceFunction {
    pub fn exp_relax(scale: f64, rate: f64) -> Self {
        DecoherenceFunction::ExpRelax { scale, rate }
    }

    pub fn expression(source: &str) -> Result<Self, ParseError> {
        let ast = exprcalc::parse(source)?;
        Ok(DecoherenceFunction::Expression {
            source: source.to_string(),
            ast,
        })
    }

    pub fn sampled(times: Vec<f64>, values: Vec<f64>) -> Result<Self, SampleError> {
        MonotoneCubic::new(times, values).map(DecoherenceFunction::SampledGrid)
    }

    /// Samples `f` on `times` and interpolates.
    pub fn resample(f: &DecoherenceFunction, times: &[f64]) -> Result<Self, EvalError> {
        let values = times
            .iter()
            .map(|&t| f.eval(t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::sampled(times.to_vec(), values).expect("grid times are ascending and finite"))
    }

    pub fn eval_dual(&self, t: f64) -> Result<Dual, EvalError> {
        match self {
            DecoherenceFunction::ExpRelax { scale, rate } => {
                let e = (-rate * t).exp();
                Ok(Dual::new(scale * (1.0 - e), scale * rate * e))
            }
            DecoherenceFunction::Expression { ast, .. } => Ok(ast.eval_dual(t)?),
            DecoherenceFunction::SampledGrid(interp) => interp.eval_dual(t),
            DecoherenceFunction::Affine {
                scale,
                rate,
                coeff,
                inner,
            } => {
                let e = (-rate * t).exp();
                let q = inner.eval_dual(t)?;
                Ok(Dual::new(
                    scale * (1.0 - e) + coeff * q.value,
                    scale * rate * e + coeff * q.derivative,
                ))
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        self.eval_dual(t).map(|d| d.value)
    }

    /// Closed-form variants start exactly at zero.
    pub fn is_closed_form(&self) -> bool {
        match self {
            DecoherenceFunction::ExpRelax { .. } | DecoherenceFunction::Expression { .. } => true,
            DecoherenceFunction::SampledGrid(_) => false,
            DecoherenceFunction::Affine { inner, .. } => inner.is_closed_form(),
        }
    }

    /// Relaxation rates appearing in the function, if any.
    pub fn relaxation_rate(&self) -> Option<f64> {
        match self {
            DecoherenceFunction::ExpRelax { rate, .. } => Some(*rate),
            DecoherenceFunction::Affine { rate, inner, .. } => Some(
                inner
                    .relaxation_rate()
                    .map_or(*rate, |r| r.min(*rate)),
            ),
            _ => None,
        }
    }

    /// Expression-language rendering, when one exists.
    pub fn to_expression(&self) -> Option<String> {
        match self {
            DecoherenceFunction::ExpRelax { scale, rate } => {
                Some(format!("{scale:?}*(1-exp(-{rate:?}*t))"))
            }
            DecoherenceFunction::Expression { ast, .. } => Some(ast.to_string()),
            DecoherenceFunction::SampledGrid(_) => None,
            DecoherenceFunction::Affine {
                scale,
                rate,
                coeff,
                inner,
            } => {
                let q = inner.to_expression()?;
                let sign = if coeff.is_sign_negative() { '-' } else { '+' };
                Some(format!("{scale:?}*(1-exp(-{rate:?}*t)){sign}{:?}*({q})", coeff.abs()))
            }
        }
    }
}

/// One generalized Pauli dephasing channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub dimension: usize,
    /// MUB label in `1..=d+1`.
    pub basis: usize,
    pub p: DecoherenceFunction,
}

impl ChannelSpec {
    pub fn new(dimension: usize, basis: usize, p: DecoherenceFunction) -> Self {
        ChannelSpec { dimension, basis, p }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub channel: ChannelSpec,
}

/// Convex combination Σ xᵢ Eᵢ of dephasing channels in one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub dimension: usize,
    pub components: Vec<Component>,
}

impl MixtureSpec {
    /// From `(weight, basis, p)` triples.
    pub fn new(
        dimension: usize,
        parts: impl IntoIterator<Item = (f64, usize, DecoherenceFunction)>,
    ) -> Self {
        let components = parts
            .into_iter()
            .map(|(weight, basis, p)| Component {
                weight,
                channel: ChannelSpec::new(dimension, basis, p),
            })
            .collect();
        MixtureSpec {
            dimension,
            components,
        }
    }

    pub fn single(channel: ChannelSpec) -> Self {
        MixtureSpec {
            dimension: channel.dimension,
            components: vec![Component {
                weight: 1.0,
                channel,
            }],
        }
    }

    pub fn weight_sum(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Smallest relaxation rate among closed-form components (sets the
    /// natural time scale).
    pub fn min_relaxation_rate(&self) -> Option<f64> {
        self.components
            .iter()
            .filter_map(|c| c.channel.p.relaxation_rate())
            .filter(|r| *r > 0.0)
            .reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyMixture,
    Dimension { message: String },
    NegativeWeight { component: usize, weight: f64 },
    WeightSum { sum: f64 },
    DimensionMismatch { component: usize, dimension: usize },
    BasisOutOfRange { component: usize, basis: usize },
    NonzeroAtOrigin { component: usize, value: f64 },
    /// p left [0, 1]; `t` is the first crossing, refined between grid nodes.
    ProbabilityOutOfRange { component: usize, t: f64, value: f64 },
    Evaluation { component: usize, t: f64, message: String },
}

impl Violation {
    /// Structural problems make the spec meaningless; range problems only
    /// make it non-CPTP.
    pub fn is_structural(&self) -> bool {
        !matches!(
            self,
            Violation::NonzeroAtOrigin { .. }
                | Violation::ProbabilityOutOfRange { .. }
                | Violation::Evaluation { .. }
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyMixture => write!(f, "mixture has no components"),
            Violation::Dimension { message } => write!(f, "{message}"),
            Violation::NegativeWeight { component, weight } => {
                write!(f, "component {}: negative weight {weight}", component + 1)
            }
            Violation::WeightSum { sum } => {
                write!(f, "weights are not on the simplex: they sum to {sum}, not 1")
            }
            Violation::DimensionMismatch { component, dimension } => {
                write!(f, "component {}: channel dimension {dimension} differs from the mixture", component + 1)
            }
            Violation::BasisOutOfRange { component, basis } => {
                write!(f, "component {}: basis label {basis} out of range", component + 1)
            }
            Violation::NonzeroAtOrigin { component, value } => {
                write!(f, "component {}: p(0) = {value}, expected 0", component + 1)
            }
            Violation::ProbabilityOutOfRange { component, t, value } => write!(
                f,
                "component {}: p leaves [0, 1] at t = {t} (value {value})",
                component + 1
            ),
            Violation::Evaluation { component, t, message } => {
                write!(f, "component {}: evaluation failed at t = {t}: {message}", component + 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub weight_sum: f64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn structurally_valid(&self) -> bool {
        self.violations.iter().all(|v| !v.is_structural())
    }

    pub fn evaluation_error(&self) -> Option<&Violation> {
        self.violations
            .iter()
            .find(|v| matches!(v, Violation::Evaluation { .. }))
    }
}

/// First time on `grid` where `p` leaves [0, 1], refined by bisection.
fn first_range_violation(
    p: &DecoherenceFunction,
    grid: &TimeGrid,
) -> Result<Option<(f64, f64)>, EvalError> {
    let outside = |v: f64| !(0.0..=1.0).contains(&v);
    let times = grid.times();
    let mut prev: Option<(f64, f64)> = None;
    for &t in times {
        let v = p.eval(t)?;
        if outside(v) {
            let Some((t0, v0)) = prev else {
                return Ok(Some((t, v)));
            };
            // crossing of whichever bound was violated
            let bound = if v > 1.0 { 1.0 } else { 0.0 };
            let sign = if v0 < bound { 1.0 } else { -1.0 };
            let tc = bisect(
                |s| p.eval(s).ok().map(|x| sign * (x - bound)),
                t0,
                t,
                1e-12,
            );
            return Ok(Some((tc, v)));
        }
        prev = Some((t, v));
    }
    Ok(None)
}

pub fn validate_mixture(spec: &MixtureSpec, grid: &TimeGrid) -> ValidationReport {
    let d = spec.dimension;
    let mut violations = Vec::new();
    if let Err(e @ (MubError::Composite(_) | MubError::OutOfRange(_))) =
        mubgen::check_dimension(d)
    {
        violations.push(Violation::Dimension {
            message: e.to_string(),
        });
    }
    if spec.components.is_empty() {
        violations.push(Violation::EmptyMixture);
    }
    for (i, c) in spec.components.iter().enumerate() {
        if !(c.weight >= 0.0) {
            violations.push(Violation::NegativeWeight {
                component: i,
                weight: c.weight,
            });
        }
        if c.channel.dimension != d {
            violations.push(Violation::DimensionMismatch {
                component: i,
                dimension: c.channel.dimension,
            });
        }
        if c.channel.basis == 0 || c.channel.basis > d + 1 {
            violations.push(Violation::BasisOutOfRange {
                component: i,
                basis: c.channel.basis,
            });
        }
    }
    let sum = spec.weight_sum();
    if !((sum - 1.0).abs() <= SIMPLEX_TOL) {
        violations.push(Violation::WeightSum { sum });
    }
    for (i, c) in spec.components.iter().enumerate() {
        let p = &c.channel.p;
        match p.eval(0.0) {
            Ok(v) if v.abs() > ORIGIN_TOL => {
                violations.push(Violation::NonzeroAtOrigin {
                    component: i,
                    value: v,
                });
            }
            _ => {}
        }
        match first_range_violation(p, grid) {
            Ok(Some((t, value))) => violations.push(Violation::ProbabilityOutOfRange {
                component: i,
                t,
                value,
            }),
            Ok(None) => {}
            Err(e) => violations.push(Violation::Evaluation {
                component: i,
                t: e.time(),
                message: e.to_string(),
            }),
        }
    }
    ValidationReport {
        weight_sum: sum,
        violations,
    }
}

/// Eigenvalues and their time derivatives, indexed by label β − 1.
pub fn single_channel_spectrum(channel: &ChannelSpec, t: f64) -> Result<Vec<Dual>, EvalError> {
    let d = channel.dimension;
    let p = channel.p.eval_dual(t)?;
    let factor = -(d as f64) / (d as f64 - 1.0);
    Ok((1..=d + 1)
        .map(|beta| {
            if beta == channel.basis {
                Dual::constant(1.0)
            } else {
                Dual::constant(1.0) + p * factor
            }
        })
        .collect())
}

pub fn single_channel_eigenvalues(channel: &ChannelSpec, t: f64) -> Result<Vec<f64>, EvalError> {
    Ok(single_channel_spectrum(channel, t)?
        .into_iter()
        .map(|d| d.value)
        .collect())
}
