//! Semigroup-yielding mixture constructions, input invertibility forecasts and
//! randomized scanners for the "noninvertible inputs are necessary" theorems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::channelcore::{validate_mixture, DecoherenceFunction, MixtureSpec, Violation};
use crate::dynamics::{
    classify_with, detect_semigroup, mixture_eigenvalues_with, rates_from_spectrum, DynamicsError,
    TimeGrid, Tolerances,
};
use crate::mubgen::{check_dimension, MubError};
use crate::par::{self, Execution};

/// Relative tie tolerance for `xᵢ = 1/d`.
pub const TIE_TOL: f64 = 1e-12;
pub const MIN_TRIALS: usize = 100;
const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructionError {
    #[error(transparent)]
    Dimension(#[from] MubError),
    #[error("target rate must be positive and finite, got {0}")]
    Rate(f64),
    #[error("mixing parameter a must lie in (0, 1), got {0}")]
    MixingParameter(f64),
    #[error("basis label {basis} outside 1..={max}")]
    Basis { basis: usize, max: usize },
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weights must sum to 1, got {0}")]
    WeightSum(f64),
    #[error(
        "weight x_{index} = {weight} is below the bound (d-1)/d^2 = {bound}: \
         none of the d+1 channels can be mixed with vanishing probability"
    )]
    BelowBound { index: usize, weight: f64, bound: f64 },
    #[error("constructed p(t) leaves [0, 1] at t = {t} (value {value})")]
    OutOfRange { t: f64, value: f64 },
    #[error("constructed p(t) cannot be evaluated: {0}")]
    Evaluation(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    /// Two channels on one basis: weight `1 − a` on the completed `p`,
    /// weight `a` on the arbitrary `q`.
    SameChannel { a: f64, q: DecoherenceFunction, basis: usize },
    AllChannels { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionRequest {
    pub dimension: usize,
    pub rate: f64,
    pub variant: Variant,
}

/// Lower bound (d−1)/d² on every weight of an all-channel construction.
pub fn weight_bound(d: usize) -> f64 {
    let d = d as f64;
    (d - 1.0) / (d * d)
}

fn check_rate(c: f64) -> Result<(), ConstructionError> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(ConstructionError::Rate(c))
    }
}

/// `p = ((d−1)/d)(1−e^{−ct})/(1−a) − a q/(1−a)` mixed as `(1−a)E^p + aE^q`,
/// so every non-self eigenvalue equals `e^{−ct}`.
pub fn build_same_channel_mix(
    d: usize,
    c: f64,
    a: f64,
    q: DecoherenceFunction,
    basis: usize,
    grid: &TimeGrid,
) -> Result<MixtureSpec, ConstructionError> {
    check_dimension(d)?;
    check_rate(c)?;
    if !(a > 0.0 && a < 1.0) {
        return Err(ConstructionError::MixingParameter(a));
    }
    if basis == 0 || basis > d + 1 {
        return Err(ConstructionError::Basis { basis, max: d + 1 });
    }
    let df = d as f64;
    let p = DecoherenceFunction::Affine {
        scale: (df - 1.0) / df / (1.0 - a),
        rate: c,
        coeff: -a / (1.0 - a),
        inner: Box::new(q.clone()),
    };
    let spec = MixtureSpec::new(d, [(1.0 - a, basis, p), (a, basis, q)]);
    let report = validate_mixture(&spec, grid);
    for v in &report.violations {
        match v {
            Violation::ProbabilityOutOfRange { t, value, .. } => {
                return Err(ConstructionError::OutOfRange { t: *t, value: *value })
            }
            Violation::Evaluation { message, .. } => {
                return Err(ConstructionError::Evaluation(message.clone()))
            }
            _ => {}
        }
    }
    Ok(spec)
}

fn check_weights(d: usize, weights: &[f64]) -> Result<(), ConstructionError> {
    check_dimension(d)?;
    if weights.len() != d + 1 {
        return Err(ConstructionError::WeightCount {
            expected: d + 1,
            got: weights.len(),
        });
    }
    let bound = weight_bound(d);
    for (i, &w) in weights.iter().enumerate() {
        if !(w >= bound * (1.0 - TIE_TOL)) {
            return Err(ConstructionError::BelowBound {
                index: i + 1,
                weight: w,
                bound,
            });
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(ConstructionError::WeightSum(sum));
    }
    Ok(())
}

/// `pᵢ = (d−1)/(xᵢ d²) · (1 − e^{−ct})` on basis i, so that every mixture
/// eigenvalue equals `e^{−ct}`.
pub fn build_all_channels_mix(d: usize, c: f64, weights: &[f64]) -> Result<MixtureSpec, ConstructionError> {
    check_rate(c)?;
    check_weights(d, weights)?;
    let df = d as f64;
    Ok(MixtureSpec::new(
        d,
        weights.iter().enumerate().map(|(i, &x)| {
            let scale = (df - 1.0) / (x * df * df);
            (x, i + 1, DecoherenceFunction::exp_relax(scale.min(1.0), c))
        }),
    ))
}

pub fn build(req: &ConstructionRequest, grid: &TimeGrid) -> Result<MixtureSpec, ConstructionError> {
    match &req.variant {
        Variant::SameChannel { a, q, basis } => {
            build_same_channel_mix(req.dimension, req.rate, *a, q.clone(), *basis, grid)
        }
        Variant::AllChannels { weights } => build_all_channels_mix(req.dimension, req.rate, weights),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Semigroup,
    InvertibleNonSemigroup,
    Noninvertible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelForecast {
    pub basis: usize,
    pub weight: f64,
    pub verdict: InputKind,
    /// Time at which the input's eigenvalue crosses zero.
    pub t_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvertibilityForecast {
    pub dimension: usize,
    pub rate: f64,
    pub channels: Vec<ChannelForecast>,
}

impl InvertibilityForecast {
    pub fn noninvertible_count(&self) -> usize {
        self.channels
            .iter()
            .filter(|c| c.verdict == InputKind::Noninvertible)
            .count()
    }
}

/// Per-input verdict for an all-channel construction: `xᵢ = 1/d` gives a
/// semigroup input, `xᵢ < 1/d` one that turns singular at
/// `t* = (1/c) ln[1/(1 − d xᵢ)]`.
pub fn forecast_invertibility(d: usize, c: f64, weights: &[f64]) -> Result<InvertibilityForecast, ConstructionError> {
    check_rate(c)?;
    check_weights(d, weights)?;
    let df = d as f64;
    let tie = 1.0 / df;
    let channels = weights
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (verdict, t_star) = if (x - tie).abs() <= TIE_TOL * tie {
                (InputKind::Semigroup, None)
            } else if x > tie {
                (InputKind::InvertibleNonSemigroup, None)
            } else {
                (InputKind::Noninvertible, Some((1.0 / (1.0 - df * x)).ln() / c))
            };
            ChannelForecast {
                basis: i + 1,
                weight: x,
                verdict,
                t_star,
            }
        })
        .collect();
    Ok(InvertibilityForecast {
        dimension: d,
        rate: c,
        channels,
    })
}

/// Whether d+1 inputs could all be semigroups (each weight 1/d) while
/// summing to one. Never true; kept as an explicit check.
pub fn all_semigroup_inputs_feasible(d: usize) -> bool {
    let total = (d + 1) as f64 / d as f64;
    (total - 1.0).abs() <= WEIGHT_SUM_TOL
}

/// Uniform draw from `{x : Σx = 1, xᵢ ≥ (d−1)/d²}`.
pub fn random_valid_weights<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let b = weight_bound(d);
    let free = 1.0 - (d + 1) as f64 * b;
    let e: Vec<f64> = (0..=d).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| b + free * v / s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ExpRelax,
    Expression,
    Sampled,
}

const FAMILIES: [Family; 3] = [Family::ExpRelax, Family::Expression, Family::Sampled];

/// Time span covered by scan grids and sampled knots.
pub const SCAN_T_MAX: f64 = 6.0;
pub const SCAN_POINTS: usize = 385;
const SAMPLED_KNOTS: usize = 49;

pub const FAMILY_DESCRIPTION: &str = "subset mixtures draw each p(t) from: exp_relax (scale in [0.1,1], rate in [0.2,3]); \
     expression templates s(1-exp(-ct))(1-b sin^2(wt)), s t^2/(k+t^2), s sin^2(wt), s(1-exp(-ct^2)); \
     sampled (monotone cubic through 49 knots of either); weights uniform on the subset simplex, floored at 0.05; \
     full constructions use x = b + (1-(d+1)b) Dirichlet(1), b = (d-1)/d^2, c in [0.5,2]";

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn random_closed_form<R: Rng>(rng: &mut R, expression: bool) -> DecoherenceFunction {
    if !expression {
        return DecoherenceFunction::exp_relax(round4(rng.gen_range(0.1..1.0)), round4(rng.gen_range(0.2..3.0)));
    }
    let s = round4(rng.gen_range(0.1..1.0));
    let c = round4(rng.gen_range(0.2..3.0));
    let w = round4(rng.gen_range(0.3..3.0));
    let src = match rng.gen_range(0..4) {
        0 => format!("{s}*(1-exp(-{c}*t))*(1-{}*sin({w}*t)^2)", round4(rng.gen_range(0.0..0.9))),
        1 => format!("{s}*t^2/({}+t^2)", round4(rng.gen_range(0.2..3.0))),
        2 => format!("{s}*sin({w}*t)^2"),
        _ => format!("{s}*(1-exp(-{c}*t^2))"),
    };
    DecoherenceFunction::expression(&src).expect("templates parse")
}

fn random_function<R: Rng>(rng: &mut R, family: Family) -> DecoherenceFunction {
    match family {
        Family::ExpRelax => random_closed_form(rng, false),
        Family::Expression => random_closed_form(rng, true),
        Family::Sampled => {
            let expression = rng.gen_bool(0.5);
            let base = random_closed_form(rng, expression);
            let knots: Vec<f64> = (0..SAMPLED_KNOTS)
                .map(|k| SCAN_T_MAX * k as f64 / (SAMPLED_KNOTS - 1) as f64)
                .collect();
            DecoherenceFunction::resample(&base, &knots).expect("templates evaluate on the scan span")
        }
    }
}

/// Random mixture of `size` distinct channels drawn from `family`.
pub fn random_subset_mixture<R: Rng>(d: usize, size: usize, family: Family, rng: &mut R) -> MixtureSpec {
    let mut labels: Vec<usize> = (1..=d + 1).collect();
    for i in 0..size {
        let j = rng.gen_range(i..labels.len());
        labels.swap(i, j);
    }
    labels.truncate(size);
    labels.sort_unstable();
    let floor = 0.05;
    let e: Vec<f64> = (0..size).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    let free = 1.0 - floor * size as f64;
    MixtureSpec::new(
        d,
        labels
            .into_iter()
            .zip(e)
            .map(|(b, v)| (floor + free * v / s, b, random_function(rng, family)))
            .collect::<Vec<_>>(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentRecord {
    pub weight: f64,
    pub basis: usize,
    pub p: String,
}

fn describe_mixture(spec: &MixtureSpec) -> Vec<ComponentRecord> {
    spec.components
        .iter()
        .map(|c| ComponentRecord {
            weight: c.weight,
            basis: c.channel.basis,
            p: c.channel.p.to_expression().unwrap_or_else(|| match &c.channel.p {
                DecoherenceFunction::SampledGrid(m) => format!(
                    "samples(times={:?}, values={:?})",
                    m.times(),
                    m.values()
                ),
                _ => String::from("?"),
            }),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterexampleKind {
    /// A proper-subset mixture classified as a semigroup.
    SubsetSemigroup,
    /// A mixture of d+1 semigroup inputs classified as a semigroup.
    SemigroupHull,
    /// A valid full construction with fewer than d noninvertible inputs.
    TooFewNoninvertible,
    /// A full construction whose mixture is not detected as a semigroup.
    ConstructionNotSemigroup,
    /// The mixture could not be evaluated.
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub kind: CounterexampleKind,
    pub trial: usize,
    pub mixture: Vec<ComponentRecord>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub dimension: usize,
    pub seed: u64,
    pub trials: usize,
    pub family: String,
    pub subset_semigroups: usize,
    pub hull_semigroups: usize,
    pub full_constructions: usize,
    pub min_noninvertible: usize,
    pub required_noninvertible: usize,
    pub all_semigroup_inputs_feasible: bool,
    pub counterexamples: Vec<Counterexample>,
    pub pass: bool,
}

fn trial_rng(seed: u64, stream: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 32) | trial as u64);
    rng
}

fn scan_grid() -> TimeGrid {
    TimeGrid::uniform(SCAN_T_MAX, SCAN_POINTS).expect("scan grid is valid")
}

fn semigroup_verdict(spec: &MixtureSpec, grid: &TimeGrid) -> Result<bool, DynamicsError> {
    let traj = mixture_eigenvalues_with(spec, grid, Execution::Sequential)?;
    let rates = rates_from_spectrum(&traj);
    Ok(detect_semigroup(&traj, &rates, Tolerances::for_spec(spec).semigroup).is_semigroup)
}

fn subset_trial(d: usize, seed: u64, trial: usize, grid: &TimeGrid) -> Option<Counterexample> {
    let mut rng = trial_rng(seed, 0, trial);
    let family = FAMILIES[trial % FAMILIES.len()];
    let size = if d == 2 { 2 } else { rng.gen_range(2..=d) };
    let spec = random_subset_mixture(d, size, family, &mut rng);
    match semigroup_verdict(&spec, grid) {
        Ok(false) => None,
        Ok(true) => Some(Counterexample {
            kind: CounterexampleKind::SubsetSemigroup,
            trial,
            mixture: describe_mixture(&spec),
            detail: format!("{size}-channel {family:?} mixture passed detect_semigroup"),
        }),
        Err(e) => Some(Counterexample {
            kind: CounterexampleKind::Evaluation,
            trial,
            mixture: describe_mixture(&spec),
            detail: e.to_string(),
        }),
    }
}

fn hull_trial(d: usize, seed: u64, trial: usize, grid: &TimeGrid) -> Option<Counterexample> {
    let mut rng = trial_rng(seed, 1, trial);
    let df = d as f64;
    let x = random_valid_weights(d, &mut rng);
    let spec = MixtureSpec::new(
        d,
        x.iter().enumerate().map(|(i, &w)| {
            let c = round4(rng.gen_range(0.5..2.0));
            (w, i + 1, DecoherenceFunction::exp_relax((df - 1.0) / df, c))
        }),
    );
    match semigroup_verdict(&spec, grid) {
        Ok(false) => None,
        Ok(true) => Some(Counterexample {
            kind: CounterexampleKind::SemigroupHull,
            trial,
            mixture: describe_mixture(&spec),
            detail: String::from("mixture of semigroup inputs passed detect_semigroup"),
        }),
        Err(e) => Some(Counterexample {
            kind: CounterexampleKind::Evaluation,
            trial,
            mixture: describe_mixture(&spec),
            detail: e.to_string(),
        }),
    }
}

fn full_trial(d: usize, seed: u64, trial: usize, grid: &TimeGrid) -> (usize, Option<Counterexample>) {
    let mut rng = trial_rng(seed, 2, trial);
    let x = random_valid_weights(d, &mut rng);
    let c = round4(rng.gen_range(0.5..2.0));
    let spec = build_all_channels_mix(d, c, &x).expect("sampled weights satisfy the bound");
    let forecast = forecast_invertibility(d, c, &x).expect("sampled weights satisfy the bound");
    let n = forecast.noninvertible_count();
    if n < d {
        return (
            n,
            Some(Counterexample {
                kind: CounterexampleKind::TooFewNoninvertible,
                trial,
                mixture: describe_mixture(&spec),
                detail: format!("{n} noninvertible inputs, expected at least {d}"),
            }),
        );
    }
    let bad = match semigroup_verdict(&spec, grid) {
        Ok(true) => None,
        Ok(false) => Some(String::from("construction failed detect_semigroup")),
        Err(e) => Some(e.to_string()),
    };
    (
        n,
        bad.map(|detail| Counterexample {
            kind: CounterexampleKind::ConstructionNotSemigroup,
            trial,
            mixture: describe_mixture(&spec),
            detail,
        }),
    )
}

/// Qubit scan: random two-channel mixtures, semigroup-input hulls and valid
/// three-channel constructions.
pub fn theorem1_scan(trials: usize, seed: u64) -> ScanReport {
    theorem2_scan_with(2, trials, seed, Execution::default())
}

pub fn theorem2_scan(d: usize, trials: usize, seed: u64) -> ScanReport {
    theorem2_scan_with(d, trials, seed, Execution::default())
}

/// `trials` proper-subset mixtures, `trials` semigroup hulls and `trials`
/// full constructions, each seeded from `(seed, trial)`.
pub fn theorem2_scan_with(d: usize, trials: usize, seed: u64, exec: Execution) -> ScanReport {
    let grid = scan_grid();
    let subset = par::map_indexed(exec, trials, |i| subset_trial(d, seed, i, &grid));
    let hull = par::map_indexed(exec, trials, |i| hull_trial(d, seed, i, &grid));
    let full = par::map_indexed(exec, trials, |i| full_trial(d, seed, i, &grid));

    let subset_semigroups = subset.iter().flatten().filter(|c| c.kind == CounterexampleKind::SubsetSemigroup).count();
    let hull_semigroups = hull.iter().flatten().filter(|c| c.kind == CounterexampleKind::SemigroupHull).count();
    let min_noninvertible = full.iter().map(|(n, _)| *n).min().unwrap_or(d + 1);
    let feasible = all_semigroup_inputs_feasible(d);
    let counterexamples: Vec<Counterexample> = subset
        .into_iter()
        .chain(hull)
        .chain(full.into_iter().map(|(_, c)| c))
        .flatten()
        .collect();
    ScanReport {
        dimension: d,
        seed,
        trials,
        family: FAMILY_DESCRIPTION.to_string(),
        subset_semigroups,
        hull_semigroups,
        full_constructions: trials,
        min_noninvertible,
        required_noninvertible: d,
        all_semigroup_inputs_feasible: feasible,
        pass: counterexamples.is_empty() && !feasible && trials >= MIN_TRIALS,
        counterexamples,
    }
}

/// Input family for simplex scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanFamily {
    /// Every input is the semigroup `((d−1)/d)(1 − e^{−ct})`.
    Semigroup,
    /// Inputs fixed to the all-channel construction at equal weights
    /// `1/(d+1)`; that point is added to the grid.
    Forced,
}

impl ScanFamily {
    pub fn inputs(self, d: usize, c: f64) -> Vec<DecoherenceFunction> {
        let df = d as f64;
        let scale = match self {
            ScanFamily::Semigroup => (df - 1.0) / df,
            ScanFamily::Forced => (df - 1.0) * (df + 1.0) / (df * df),
        };
        vec![DecoherenceFunction::exp_relax(scale, c); d + 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexRow {
    pub weights: Vec<f64>,
    pub support: usize,
    pub valid: bool,
    pub is_semigroup: bool,
    pub is_cp_divisible: bool,
    pub min_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexSummary {
    /// Points with at least two nonzero weights.
    pub mixtures: usize,
    pub semigroup_fraction: f64,
    pub cp_divisible_fraction: f64,
    pub cp_indivisible_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexScan {
    pub dimension: usize,
    pub step: f64,
    pub family: ScanFamily,
    pub rate: f64,
    pub rows: Vec<SimplexRow>,
    pub summary: SimplexSummary,
}

/// All weight vectors on the simplex with entries in multiples of `1/n`.
pub fn simplex_points(parts: usize, n: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k);
            rec(left - k, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, parts, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|v| v.into_iter().map(|k| k as f64 / n as f64).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error(transparent)]
    Dimension(#[from] MubError),
    #[error("step must divide 1 into a whole number of parts, got {0}")]
    Step(f64),
    #[error("rate must be positive, got {0}")]
    Rate(f64),
    #[error("weights {weights:?}: {source}")]
    Point { weights: Vec<f64>, source: DynamicsError },
}

pub fn simplex_scan(d: usize, step: f64, family: ScanFamily, c: f64) -> Result<SimplexScan, ScanError> {
    simplex_scan_with(d, step, family, c, Execution::default())
}

pub fn simplex_scan_with(
    d: usize,
    step: f64,
    family: ScanFamily,
    c: f64,
    exec: Execution,
) -> Result<SimplexScan, ScanError> {
    check_dimension(d)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(ScanError::Rate(c));
    }
    let n = (1.0 / step).round();
    if !(step > 0.0) || n < 1.0 || (n * step - 1.0).abs() > 1e-9 {
        return Err(ScanError::Step(step));
    }
    let mut points = simplex_points(d + 1, n as usize);
    if family == ScanFamily::Forced {
        let centre = vec![1.0 / (d + 1) as f64; d + 1];
        if !points.iter().any(|p| p.iter().zip(&centre).all(|(a, b)| (a - b).abs() < 1e-12)) {
            points.push(centre);
        }
    }
    let inputs = family.inputs(d, c);
    let grid = TimeGrid::uniform(5.0 / c, crate::dynamics::DEFAULT_POINTS).expect("valid grid");
    let rows = par::map_slice(exec, &points, |w| -> Result<SimplexRow, ScanError> {
        let spec = MixtureSpec::new(
            d,
            w.iter().zip(&inputs).enumerate().map(|(i, (&x, p))| (x, i + 1, p.clone())),
        );
        let report = classify_with(&spec, &grid, Tolerances::for_spec(&spec), Execution::Sequential).map_err(
            |source| ScanError::Point {
                weights: w.clone(),
                source,
            },
        )?;
        Ok(SimplexRow {
            weights: w.clone(),
            support: w.iter().filter(|x| **x > 0.0).count(),
            valid: report.valid,
            is_semigroup: report.is_semigroup,
            is_cp_divisible: report.is_cp_divisible,
            min_rate: report.min_rate,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mixed: Vec<&SimplexRow> = rows.iter().filter(|r| r.support >= 2).collect();
    let m = mixed.len().max(1) as f64;
    let frac = |f: &dyn Fn(&SimplexRow) -> bool| mixed.iter().filter(|r| f(r)).count() as f64 / m;
    let summary = SimplexSummary {
        mixtures: mixed.len(),
        semigroup_fraction: frac(&|r| r.is_semigroup),
        cp_divisible_fraction: frac(&|r| r.is_cp_divisible),
        cp_indivisible_fraction: frac(&|r| !r.is_cp_divisible),
    };
    Ok(SimplexScan {
        dimension: d,
        step,
        family,
        rate: c,
        rows,
        summary,
    })
}

/// CSV of a simplex scan: `x_1..x_{d+1},support,valid,is_semigroup,is_cp_divisible,min_rate`.
pub fn simplex_csv(scan: &SimplexScan) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for i in 1..=scan.dimension + 1 {
        let _ = write!(out, "x_{i},");
    }
    out.push_str("support,valid,is_semigroup,is_cp_divisible,min_rate\n");
    for r in &scan.rows {
        for w in &r.weights {
            let _ = write!(out, "{w:.16e},");
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{:.16e}",
            r.support, r.valid, r.is_semigroup, r.is_cp_divisible, r.min_rate
        );
    }
    out
}
