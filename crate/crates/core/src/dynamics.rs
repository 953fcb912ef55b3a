//! Mixture eigenvalues, time-local decay rates, singularity detection and
//! classification (semigroup / CP-divisible / CP-indivisible).
//!
//! The generator is written as `L = Σ_α γ_α D_α` with
//! `D_α(ρ) = (1/(d−1)) Σ_{k=1}^{d−1} U_α^k ρ U_α^{k†} − ρ`, which reduces to
//! `σ_α ρ σ_α − ρ` for qubits. On `U_β^m` it acts as `−Γ_β` with
//! `Γ_β = d/(d−1) Σ_{α≠β} γ_α = −λ̇_β / λ_β`; inverting gives
//! `γ_α = (d−1)/d · [(1/d) Σ_β Γ_β − Γ_α]`.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::channelcore::{
    self, validate_mixture, EvalError, MixtureSpec, ValidationReport, Violation,
};
use crate::exprcalc::Dual;
use crate::matrixlab::{self, choi_of, map_from_spectrum, psd_check, MatrixError};
use crate::mubgen::WeylSet;
use crate::par::{self, Execution};
use crate::roots::bisect;

/// Minimum number of grid intervals.
pub const MIN_INTERVALS: usize = 32;
pub const DEFAULT_POINTS: usize = 512;
/// |λ| below this marks a rate pole.
pub const POLE_EPS: f64 = 1e-12;
/// Bisection width for singular times.
pub const SINGULAR_TOL: f64 = 1e-12;
pub const SEMIGROUP_TOL_EXACT: f64 = 1e-8;
pub const SEMIGROUP_TOL_SAMPLED: f64 = 1e-5;
pub const CP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least {min} points, got {0}", min = MIN_INTERVALS + 1)]
    TooFew(usize),
    #[error("grid must start at t = 0 (starts at {0})")]
    NotAtOrigin(f64),
    #[error("grid times must be finite and strictly ascending (index {0})")]
    NotAscending(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("mixture is invalid: {}", describe(.0))]
    Invalid(ValidationReport),
    #[error("component {component}: {source}")]
    Eval { component: usize, source: EvalError },
    #[error("interval [{a}, {b}] is not a forward pair of grid indices")]
    BadInterval { a: usize, b: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

fn describe(r: &ValidationReport) -> String {
    r.violations
        .iter()
        .filter(|v| v.is_structural())
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Strictly ascending times starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, GridError> {
        if times.len() < MIN_INTERVALS + 1 {
            return Err(GridError::TooFew(times.len()));
        }
        if times[0] != 0.0 {
            return Err(GridError::NotAtOrigin(times[0]));
        }
        if let Some(i) = (1..times.len()).find(|&i| !(times[i] > times[i - 1]) || !times[i].is_finite()) {
            return Err(GridError::NotAscending(i));
        }
        Ok(TimeGrid { times })
    }

    pub fn uniform(t_max: f64, points: usize) -> Result<Self, GridError> {
        if points < 2 {
            return Err(GridError::TooFew(points));
        }
        let step = t_max / (points - 1) as f64;
        Self::new((0..points).map(|k| k as f64 * step).collect())
    }

    /// 512 points over `[0, 5 / c_min]`, `c_min` the slowest relaxation rate in
    /// the mixture (1 when there is none).
    pub fn default_for(spec: &MixtureSpec) -> Self {
        let c = spec.min_relaxation_rate().unwrap_or(1.0);
        Self::uniform(5.0 / c, DEFAULT_POINTS).expect("default grid is valid")
    }

    /// Adds geometrically clustered points on both sides of each time in `near`.
    pub fn refined_near(&self, near: &[f64], levels: u32) -> Self {
        let t_max = self.t_max();
        let step = t_max / (self.times.len() - 1) as f64;
        let mut times = self.times.clone();
        for &ts in near {
            for k in 1..=levels {
                let h = step * 0.5f64.powi(k as i32);
                for t in [ts - h, ts + h] {
                    if t > 0.0 && t < t_max {
                        times.push(t);
                    }
                }
            }
        }
        times.sort_by(f64::total_cmp);
        times.dedup();
        TimeGrid { times }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn midpoint_index(&self) -> usize {
        self.times.len() / 2
    }
}

/// Mixture eigenvalues (with derivatives) at one time, indexed by label β − 1:
/// `λ_β = 1 − d/(d−1) Σ_{j: basis_j ≠ β} x_j p_j(t)`.
pub fn spectrum_at(spec: &MixtureSpec, t: f64) -> Result<Vec<Dual>, DynamicsError> {
    let d = spec.dimension;
    let factor = -(d as f64) / (d as f64 - 1.0);
    let mut lams = vec![Dual::constant(1.0); d + 1];
    for (i, c) in spec.components.iter().enumerate() {
        let p = c
            .channel
            .p
            .eval_dual(t)
            .map_err(|source| DynamicsError::Eval { component: i, source })?;
        let contrib = p * (factor * c.weight);
        for (beta, lam) in lams.iter_mut().enumerate() {
            if beta + 1 != c.channel.basis {
                *lam = *lam + contrib;
            }
        }
    }
    Ok(lams)
}

/// λ_β(t) and λ̇_β(t) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTrajectory {
    dimension: usize,
    grid: TimeGrid,
    /// `points[k][β − 1]`
    points: Vec<Vec<Dual>>,
}

impl SpectralTrajectory {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn lambda(&self, beta: usize, k: usize) -> f64 {
        self.points[k][beta - 1].value
    }

    pub fn lambda_dot(&self, beta: usize, k: usize) -> f64 {
        self.points[k][beta - 1].derivative
    }

    /// All labels at grid index `k`.
    pub fn at(&self, k: usize) -> &[Dual] {
        &self.points[k]
    }

    pub fn labels(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.dimension + 1
    }
}

pub fn mixture_eigenvalues(spec: &MixtureSpec, grid: &TimeGrid) -> Result<SpectralTrajectory, DynamicsError> {
    mixture_eigenvalues_with(spec, grid, Execution::default())
}

pub fn mixture_eigenvalues_with(
    spec: &MixtureSpec,
    grid: &TimeGrid,
    exec: Execution,
) -> Result<SpectralTrajectory, DynamicsError> {
    let points = par::map_slice(exec, grid.times(), |&t| spectrum_at(spec, t))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SpectralTrajectory {
        dimension: spec.dimension,
        grid: grid.clone(),
        points,
    })
}

/// Decay rates from one spectral point. The flag is set when some |λ_β| is
/// below [`POLE_EPS`].
pub fn rates_from_point(lams: &[Dual], d: usize) -> (Vec<f64>, bool) {
    let df = d as f64;
    let pole = lams.iter().any(|l| l.value.abs() < POLE_EPS);
    let big_gamma: Vec<f64> = lams.iter().map(|l| -l.derivative / l.value).collect();
    let mean = big_gamma.iter().sum::<f64>() / df;
    let rates = big_gamma
        .iter()
        .map(|g| {
            let r = (df - 1.0) / df * (mean - g);
            if r.is_nan() {
                f64::INFINITY
            } else if pole && r.is_finite() && r.abs() < 1.0 / POLE_EPS {
                // nonzero λ below POLE_EPS: the rate is genuinely divergent
                r.signum() * f64::INFINITY
            } else {
                r
            }
        })
        .collect();
    (rates, pole)
}

/// Rates at a single time, straight from the mixture.
pub fn rates_at(spec: &MixtureSpec, t: f64) -> Result<Vec<f64>, DynamicsError> {
    Ok(rates_from_point(&spectrum_at(spec, t)?, spec.dimension).0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTrajectory {
    dimension: usize,
    grid: TimeGrid,
    /// `points[k][α − 1]`
    points: Vec<Vec<f64>>,
    poles: Vec<usize>,
}

impl RateTrajectory {
    pub fn rate(&self, alpha: usize, k: usize) -> f64 {
        self.points[k][alpha - 1]
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.points[k]
    }

    /// Grid indices where some eigenvalue vanishes.
    pub fn poles(&self) -> &[usize] {
        &self.poles
    }

    pub fn is_pole(&self, k: usize) -> bool {
        self.poles.binary_search(&k).is_ok()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// min γ over grid indices `a..=b` and all labels.
    pub fn min_rate_between(&self, a: usize, b: usize) -> f64 {
        self.points[a..=b]
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn rates_from_spectrum(traj: &SpectralTrajectory) -> RateTrajectory {
    let d = traj.dimension;
    let mut poles = Vec::new();
    let points = traj
        .points
        .iter()
        .enumerate()
        .map(|(k, lams)| {
            let (rates, pole) = rates_from_point(lams, d);
            if pole {
                poles.push(k);
            }
            rates
        })
        .collect();
    RateTrajectory {
        dimension: d,
        grid: traj.grid.clone(),
        points,
        poles,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemigroupFit {
    pub is_semigroup: bool,
    /// r_β = −ln λ_β(t_ref) / t_ref, absent when λ_β(t_ref) ≤ 0.
    pub exponents: Vec<Option<f64>>,
    pub t_ref: f64,
    /// max |λ_β(t) − e^{−r_β t}|
    pub max_fit_deviation: f64,
    /// max over α of (max γ_α − min γ_α)
    pub max_rate_spread: f64,
}

pub fn detect_semigroup(traj: &SpectralTrajectory, rates: &RateTrajectory, tol: f64) -> SemigroupFit {
    let grid = traj.grid();
    let k_ref = grid.midpoint_index();
    let t_ref = grid.times()[k_ref];
    let labels = traj.dimension + 1;
    let exponents: Vec<Option<f64>> = (1..=labels)
        .map(|b| {
            let l = traj.lambda(b, k_ref);
            (l > 0.0).then(|| -l.ln() / t_ref)
        })
        .collect();
    let all_positive = traj.points.iter().flatten().all(|l| l.value > 0.0);

    let mut max_fit: f64 = 0.0;
    for (b, r) in exponents.iter().enumerate() {
        let r = r.unwrap_or(f64::NAN);
        for (k, &t) in grid.times().iter().enumerate() {
            let dev = (traj.points[k][b].value - (-r * t).exp()).abs();
            max_fit = if dev.is_nan() { f64::INFINITY } else { max_fit.max(dev) };
        }
    }

    let mut spread: f64 = 0.0;
    for a in 0..labels {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..grid.len() {
            let g = rates.points[k][a];
            lo = lo.min(g);
            hi = hi.max(g);
        }
        let s = hi - lo;
        spread = if s.is_finite() { spread.max(s) } else { f64::INFINITY };
    }

    SemigroupFit {
        is_semigroup: all_positive && max_fit <= tol && spread <= tol,
        exponents,
        t_ref,
        max_fit_deviation: max_fit,
        max_rate_spread: spread,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularPoint {
    pub label: usize,
    pub t: f64,
}

/// Zero crossings of `f` sampled on the grid, refined by bisection.
fn zero_crossings<F>(grid: &TimeGrid, samples: &[f64], f: F) -> Vec<f64>
where
    F: Fn(f64) -> Option<f64>,
{
    let times = grid.times();
    let mut out = Vec::new();
    for k in 0..samples.len() {
        let v = samples[k];
        if v == 0.0 {
            out.push(times[k]);
            continue;
        }
        if k > 0 {
            let u = samples[k - 1];
            if u != 0.0 && (u < 0.0) != (v < 0.0) {
                out.push(bisect(&f, times[k - 1], times[k], SINGULAR_TOL));
            }
        }
    }
    out
}

/// Times where λ_β of the mixture crosses zero, per label.
pub fn singular_points(spec: &MixtureSpec, traj: &SpectralTrajectory) -> Vec<SingularPoint> {
    let mut out = Vec::new();
    for beta in traj.labels() {
        let samples: Vec<f64> = (0..traj.grid.len()).map(|k| traj.lambda(beta, k)).collect();
        let f = |t: f64| spectrum_at(spec, t).ok().map(|l| l[beta - 1].value);
        for t in zero_crossings(&traj.grid, &samples, f) {
            out.push(SingularPoint { label: beta, t });
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.label.cmp(&b.label)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub semigroup: f64,
    pub cp: f64,
}

impl Tolerances {
    /// 1e-8 for closed-form inputs, 1e-5 once any input is sampled.
    pub fn for_spec(spec: &MixtureSpec) -> Self {
        let exact = spec.components.iter().all(|c| c.channel.p.is_closed_form());
        Tolerances {
            semigroup: if exact { SEMIGROUP_TOL_EXACT } else { SEMIGROUP_TOL_SAMPLED },
            cp: CP_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputVerdict {
    pub component: usize,
    pub basis: usize,
    pub weight: f64,
    pub invertible: bool,
    pub is_semigroup: bool,
    pub singular_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub dimension: usize,
    pub grid_points: usize,
    pub t_max: f64,
    pub is_semigroup: bool,
    pub exponents: Vec<Option<f64>>,
    pub max_fit_deviation: f64,
    pub max_rate_spread: f64,
    pub is_cp_divisible: bool,
    /// min γ over non-pole grid points
    pub min_rate: f64,
    pub singular_times: Vec<SingularPoint>,
    pub inputs: Vec<InputVerdict>,
    /// every p(t) within [0, 1] and p(0) = 0 on the grid
    pub valid: bool,
    pub violations: Vec<Violation>,
    pub semigroup_tolerance: f64,
    pub cp_tolerance: f64,
}

impl ClassificationReport {
    pub fn is_cp_indivisible(&self) -> bool {
        !self.is_cp_divisible
    }
}

fn input_verdict(
    spec: &MixtureSpec,
    index: usize,
    grid: &TimeGrid,
    tol: f64,
) -> Result<InputVerdict, DynamicsError> {
    let c = &spec.components[index];
    let single = MixtureSpec::single(c.channel.clone());
    let remap = |e: DynamicsError| match e {
        DynamicsError::Eval { source, .. } => DynamicsError::Eval { component: index, source },
        other => other,
    };
    let traj = mixture_eigenvalues_with(&single, grid, Execution::Sequential).map_err(remap)?;
    let rates = rates_from_spectrum(&traj);
    let fit = detect_semigroup(&traj, &rates, tol);
    // all non-self labels share one eigenvalue
    let beta = if c.channel.basis == 1 { 2 } else { 1 };
    let samples: Vec<f64> = (0..grid.len()).map(|k| traj.lambda(beta, k)).collect();
    let f = |t: f64| {
        channelcore::single_channel_eigenvalues(&c.channel, t)
            .ok()
            .map(|l| l[beta - 1])
    };
    let singular_times = zero_crossings(grid, &samples, f);
    Ok(InputVerdict {
        component: index,
        basis: c.channel.basis,
        weight: c.weight,
        invertible: singular_times.is_empty(),
        is_semigroup: fit.is_semigroup && rates.min_rate_between(0, grid.len() - 1) >= -CP_TOL,
        singular_times,
    })
}

pub fn classify(spec: &MixtureSpec, grid: &TimeGrid, tol: Tolerances) -> Result<ClassificationReport, DynamicsError> {
    classify_with(spec, grid, tol, Execution::default())
}

pub fn classify_with(
    spec: &MixtureSpec,
    grid: &TimeGrid,
    tol: Tolerances,
    exec: Execution,
) -> Result<ClassificationReport, DynamicsError> {
    let validation = validate_mixture(spec, grid);
    if !validation.structurally_valid() {
        return Err(DynamicsError::Invalid(validation));
    }
    let traj = mixture_eigenvalues_with(spec, grid, exec)?;
    let rates = rates_from_spectrum(&traj);
    let fit = detect_semigroup(&traj, &rates, tol.semigroup);
    let min_rate = (0..grid.len())
        .filter(|k| !rates.is_pole(*k))
        .flat_map(|k| rates.at(k).iter().copied())
        .fold(f64::INFINITY, f64::min);
    let is_cp_divisible = min_rate >= -tol.cp;
    let singular_times = singular_points(spec, &traj);
    let inputs = (0..spec.components.len())
        .map(|i| input_verdict(spec, i, grid, tol.semigroup))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClassificationReport {
        dimension: spec.dimension,
        grid_points: grid.len(),
        t_max: grid.t_max(),
        is_semigroup: fit.is_semigroup && is_cp_divisible,
        exponents: fit.exponents,
        max_fit_deviation: fit.max_fit_deviation,
        max_rate_spread: fit.max_rate_spread,
        is_cp_divisible,
        min_rate,
        singular_times,
        inputs,
        valid: validation.pass(),
        violations: validation.violations,
        semigroup_tolerance: tol.semigroup,
        cp_tolerance: tol.cp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum IntermediateVerdict {
    Cp { min_choi_eigenvalue: f64 },
    NotCp { min_choi_eigenvalue: f64 },
    /// λ_β(t_a) = 0: the intermediate map does not exist.
    Undefined { label: usize, t: f64 },
}

impl IntermediateVerdict {
    pub fn is_cp(&self) -> Option<bool> {
        match self {
            IntermediateVerdict::Cp { .. } => Some(true),
            IntermediateVerdict::NotCp { .. } => Some(false),
            IntermediateVerdict::Undefined { .. } => None,
        }
    }
}

/// CP verdict for E(t_b, t_a) = E(t_b) E(t_a)^{-1} between grid indices `a < b`.
pub fn intermediate_map_check(
    traj: &SpectralTrajectory,
    weyl: &WeylSet,
    a: usize,
    b: usize,
    tol: f64,
) -> Result<IntermediateVerdict, DynamicsError> {
    if a >= b || b >= traj.grid.len() {
        return Err(DynamicsError::BadInterval { a, b });
    }
    let t_a = traj.grid.times()[a];
    let mut mu = Vec::with_capacity(traj.dimension + 1);
    for beta in traj.labels() {
        let la = traj.lambda(beta, a);
        if la.abs() < POLE_EPS {
            return Ok(IntermediateVerdict::Undefined { label: beta, t: t_a });
        }
        mu.push(traj.lambda(beta, b) / la);
    }
    let choi = choi_of(traj.dimension, map_from_spectrum(weyl, &mu));
    let v = psd_check(choi.matrix(), tol)?;
    Ok(if v.psd {
        IntermediateVerdict::Cp { min_choi_eigenvalue: v.min_eigenvalue }
    } else {
        IntermediateVerdict::NotCp { min_choi_eigenvalue: v.min_eigenvalue }
    })
}

fn fmt_float(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("inf");
    } else {
        let _ = write!(out, "{v:.16e}");
    }
}

/// CSV with header `t,lambda_1..lambda_{d+1},gamma_1..gamma_{d+1}`; rate poles
/// print as `inf` / `-inf`.
pub fn trajectory_csv(traj: &SpectralTrajectory, rates: &RateTrajectory) -> String {
    let labels = traj.dimension + 1;
    let mut out = String::from("t");
    for b in 1..=labels {
        let _ = write!(out, ",lambda_{b}");
    }
    for a in 1..=labels {
        let _ = write!(out, ",gamma_{a}");
    }
    out.push('\n');
    for (k, &t) in traj.grid.times().iter().enumerate() {
        fmt_float(&mut out, t);
        for b in 1..=labels {
            out.push(',');
            fmt_float(&mut out, traj.lambda(b, k));
        }
        for a in 1..=labels {
            out.push(',');
            let r = rates.rate(a, k);
            if rates.is_pole(k) && r.is_finite() {
                out.push_str(if r < 0.0 { "-inf" } else { "inf" });
            } else {
                fmt_float(&mut out, r);
            }
        }
        out.push('\n');
    }
    out
}

/// Superoperator eigenvalues expected from the mixture spectrum at `k`:
/// 1 once, each λ_β with multiplicity d − 1. Sorted ascending.
pub fn expected_superoperator_spectrum(traj: &SpectralTrajectory, k: usize) -> Vec<f64> {
    let d = traj.dimension;
    let mut v = vec![1.0];
    for beta in traj.labels() {
        v.extend(std::iter::repeat_n(traj.lambda(beta, k), d - 1));
    }
    v.sort_by(f64::total_cmp);
    v
}

/// Superoperator eigenvalues of the mixture at time `t` (the superoperator of
/// a mixture of conjugations closed under inverses is Hermitian).
pub fn superoperator_spectrum(weyl: &WeylSet, spec: &MixtureSpec, t: f64) -> Result<Vec<f64>, DynamicsError> {
    let m = matrixlab::superoperator(weyl, spec, t)?;
    Ok(matrixlab::hermitian_eigen(&m).values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channelcore::DecoherenceFunction;
    use crate::mubgen::weyl_set;

    fn equal_mix(d: usize, p: DecoherenceFunction) -> MixtureSpec {
        let x = 1.0 / (d + 1) as f64;
        MixtureSpec::new(d, (1..=d + 1).map(|b| (x, b, p.clone())))
    }

    fn grid() -> TimeGrid {
        TimeGrid::uniform(5.0, 512).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert_eq!(TimeGrid::uniform(1.0, 32).unwrap_err(), GridError::TooFew(32));
        assert!(TimeGrid::uniform(1.0, 33).is_ok());
        let mut t: Vec<f64> = (0..40).map(|k| k as f64).collect();
        t[5] = 4.0;
        assert_eq!(TimeGrid::new(t).unwrap_err(), GridError::NotAscending(5));
        let t: Vec<f64> = (1..40).map(|k| k as f64).collect();
        assert_eq!(TimeGrid::new(t).unwrap_err(), GridError::NotAtOrigin(1.0));
    }

    #[test]
    fn refinement_clusters_points() {
        let g = grid().refined_near(&[3f64.ln()], 10);
        assert_eq!(g.len(), 512 + 20);
        let closest = g.times().iter().map(|t| (t - 3f64.ln()).abs()).fold(f64::INFINITY, f64::min);
        assert!(closest < 1e-4);
        assert!(TimeGrid::new(g.times().to_vec()).is_ok());
    }

    #[test]
    fn example_one_spectrum() {
        let spec = equal_mix(2, DecoherenceFunction::exp_relax(0.75, 1.0));
        let traj = mixture_eigenvalues(&spec, &grid()).unwrap();
        for (k, &t) in grid().times().iter().enumerate() {
            for b in 1..=3 {
                assert!((traj.lambda(b, k) - (-t).exp()).abs() < 1e-15);
                assert!((traj.lambda_dot(b, k) + (-t).exp()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn three_semigroup_spectrum() {
        let spec = equal_mix(2, DecoherenceFunction::exp_relax(0.5, 1.0));
        let traj = mixture_eigenvalues(&spec, &grid()).unwrap();
        for (k, &t) in grid().times().iter().enumerate() {
            assert!((traj.lambda(2, k) - (1.0 + 2.0 * (-t).exp()) / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_component_matches_single_channel() {
        let p = DecoherenceFunction::exp_relax(0.6, 1.7);
        let ch = crate::channelcore::ChannelSpec::new(3, 2, p);
        let traj = mixture_eigenvalues(&MixtureSpec::single(ch.clone()), &grid()).unwrap();
        for (k, &t) in grid().times().iter().enumerate().step_by(37) {
            let l = crate::channelcore::single_channel_eigenvalues(&ch, t).unwrap();
            for b in 1..=4 {
                assert_eq!(traj.lambda(b, k), l[b - 1]);
            }
        }
    }

    #[test]
    fn constant_spectrum_has_quarter_rates() {
        let lams = vec![Dual::new(0.3, -0.3); 3];
        let (r, pole) = rates_from_point(&lams, 2);
        assert!(!pole);
        assert!(r.iter().all(|g| (g - 0.25).abs() < 1e-15));
        let ident = vec![Dual::constant(1.0); 4];
        assert!(rates_from_point(&ident, 3).0.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn remark_rates() {
        let spec = equal_mix(2, DecoherenceFunction::exp_relax(0.5, 1.0));
        let traj = mixture_eigenvalues(&spec, &grid()).unwrap();
        let rates = rates_from_spectrum(&traj);
        assert!((rates.rate(1, 0) - 1.0 / 6.0).abs() < 1e-15);
        for (k, &t) in grid().times().iter().enumerate() {
            for a in 1..=3 {
                assert!((rates.rate(a, k) - 1.0 / (2.0 * (2.0 + t.exp()))).abs() < 1e-12);
            }
        }
        assert!(!detect_semigroup(&traj, &rates, 1e-8).is_semigroup);
    }

    #[test]
    fn identity_dynamics_is_semigroup() {
        let spec = equal_mix(3, DecoherenceFunction::exp_relax(0.0, 1.0));
        let traj = mixture_eigenvalues(&spec, &grid()).unwrap();
        let fit = detect_semigroup(&traj, &rates_from_spectrum(&traj), 1e-8);
        assert!(fit.is_semigroup);
        assert!(fit.exponents.iter().all(|r| *r == Some(0.0)));
    }

    #[test]
    fn singular_time_at_ln2() {
        // λ = 1 − 2p = 2e^{−t} − 1 vanishes at ln 2
        for d in [2usize, 3] {
            let s = 2.0 * (d as f64 - 1.0) / d as f64;
            let spec = MixtureSpec::new(d, [(1.0, 1, DecoherenceFunction::exp_relax(s, 1.0))]);
            let g = TimeGrid::uniform(2.0, 64).unwrap();
            let report = classify(&spec, &g, Tolerances::for_spec(&spec)).unwrap();
            assert!(!report.singular_times.is_empty());
            for sp in &report.singular_times {
                assert_ne!(sp.label, 1);
                assert!((sp.t - 2f64.ln()).abs() < 1e-10);
            }
            assert!(!report.inputs[0].invertible);
            assert!(!report.is_cp_divisible);
        }
    }

    #[test]
    fn invalid_mixture_is_rejected() {
        let p = DecoherenceFunction::exp_relax(0.5, 1.0);
        let spec = MixtureSpec::new(2, [(0.6, 1, p.clone()), (0.6, 2, p)]);
        assert!(matches!(
            classify(&spec, &grid(), Tolerances::for_spec(&spec)),
            Err(DynamicsError::Invalid(_))
        ));
    }

    #[test]
    fn undefined_intermediate_map_at_singularity() {
        let spec = MixtureSpec::new(2, [(1.0, 3, DecoherenceFunction::expression("t/2").unwrap())]);
        let g = TimeGrid::uniform(2.0, 33).unwrap();
        let traj = mixture_eigenvalues(&spec, &g).unwrap();
        let w = weyl_set(2).unwrap();
        let k = g.times().iter().position(|&t| t == 1.0).unwrap();
        let v = intermediate_map_check(&traj, &w, k, k + 3, CP_TOL).unwrap();
        assert_eq!(v, IntermediateVerdict::Undefined { label: 1, t: 1.0 });
        assert!(intermediate_map_check(&traj, &w, 4, 4, CP_TOL).is_err());
        let rates = rates_from_spectrum(&traj);
        assert_eq!(rates.poles(), &[k]);
        let csv = trajectory_csv(&traj, &rates);
        let row: Vec<&str> = csv.lines().nth(k + 1).unwrap().split(',').collect();
        assert!(row[4..].iter().any(|s| *s == "inf" || *s == "-inf"), "{row:?}");
    }

    #[test]
    fn csv_header() {
        let spec = equal_mix(3, DecoherenceFunction::exp_relax(0.6, 1.0));
        let g = TimeGrid::uniform(1.0, 33).unwrap();
        let traj = mixture_eigenvalues(&spec, &g).unwrap();
        let csv = trajectory_csv(&traj, &rates_from_spectrum(&traj));
        assert_eq!(
            csv.lines().next().unwrap(),
            "t,lambda_1,lambda_2,lambda_3,lambda_4,gamma_1,gamma_2,gamma_3,gamma_4"
        );
        assert_eq!(csv.lines().count(), 34);
    }

    #[test]
    fn sequential_and_default_agree() {
        let spec = equal_mix(3, DecoherenceFunction::exp_relax(0.6, 1.0));
        let a = mixture_eigenvalues_with(&spec, &grid(), Execution::Sequential).unwrap();
        let b = mixture_eigenvalues(&spec, &grid()).unwrap();
        assert_eq!(a, b);
    }
}
