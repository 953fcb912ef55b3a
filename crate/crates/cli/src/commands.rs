use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use chanmix::channelcore::{DecoherenceFunction, MixtureSpec};
use chanmix::dynamics::{
    classify, mixture_eigenvalues, rates_from_spectrum, trajectory_csv, ClassificationReport,
    DynamicsError, TimeGrid,
};
use chanmix::matrixlab::{choi, psd_check, PSD_TOL};
use chanmix::mubgen::{bases_csv, construct_mub, twirl_residual, unitaries_csv, verify_mub, weyl_set};
use chanmix::semigroupforge::{
    build_all_channels_mix, build_same_channel_mix, forecast_invertibility, random_subset_mixture,
    simplex_csv, simplex_scan, theorem1_scan, theorem2_scan, ConstructionError, Family, InputKind,
    ScanError, ScanFamily,
};

use crate::config::{render, GridSpec, RunConfig};
use crate::error::CliError;

/// Levels of geometric refinement around detected singular times.
const REFINE_LEVELS: u32 = 12;

fn dynamics_error(e: DynamicsError) -> CliError {
    match e {
        DynamicsError::Invalid(r) => CliError::Validation(
            r.violations
                .iter()
                .filter(|v| v.is_structural())
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        ),
        DynamicsError::Eval { component, source } => {
            CliError::Evaluation(format!("component {}: {source}", component + 1))
        }
        other => CliError::Internal(other.to_string()),
    }
}

fn construction_error(e: ConstructionError) -> CliError {
    match e {
        ConstructionError::Evaluation(m) => CliError::Evaluation(m),
        other => CliError::Validation(other.to_string()),
    }
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn all_singular_times(report: &ClassificationReport) -> Vec<f64> {
    report
        .singular_times
        .iter()
        .map(|s| s.t)
        .chain(report.inputs.iter().flat_map(|i| i.singular_times.iter().copied()))
        .collect()
}

pub fn analyze(config: &Path, out_dir: &Path) -> Result<ClassificationReport, CliError> {
    let cfg = RunConfig::load(config)?;
    let spec = cfg.mixture()?;
    let mut grid = cfg.time_grid(&spec)?;
    let tol = cfg.tolerances(&spec);
    let mut report = classify(&spec, &grid, tol).map_err(dynamics_error)?;
    if cfg.grid.is_none() {
        let near = all_singular_times(&report);
        if !near.is_empty() {
            grid = grid.refined_near(&near, REFINE_LEVELS);
            report = classify(&spec, &grid, tol).map_err(dynamics_error)?;
        }
    }
    let traj = mixture_eigenvalues(&spec, &grid).map_err(dynamics_error)?;
    let rates = rates_from_spectrum(&traj);
    let trajectory_path = out_dir.join(&cfg.output.trajectory);
    let classification_path = out_dir.join(&cfg.output.classification);
    write_output(Some(&trajectory_path), &trajectory_csv(&traj, &rates))?;
    write_output(Some(&classification_path), &to_json(&report)?)?;
    println!(
        "semigroup={} cp_divisible={} singular_times={} noninvertible_inputs={} valid={}",
        report.is_semigroup,
        report.is_cp_divisible,
        report.singular_times.len(),
        report.inputs.iter().filter(|i| !i.invertible).count(),
        report.valid
    );
    println!("wrote {} and {}", trajectory_path.display(), classification_path.display());
    if !report.valid {
        let msg = report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
        return Err(CliError::Validation(msg));
    }
    Ok(report)
}

pub enum ConstructArgs {
    AllChannels { weights: Vec<f64> },
    SameChannel { a: f64, q: String, basis: usize },
}

pub fn construct(d: usize, c: f64, args: ConstructArgs, out: Option<&Path>) -> Result<String, CliError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(CliError::Validation(format!("rate c must be positive, got {c}")));
    }
    let grid_spec = GridSpec {
        t_max: 5.0 / c,
        points: chanmix::dynamics::DEFAULT_POINTS,
    };
    let grid = TimeGrid::uniform(grid_spec.t_max, grid_spec.points).map_err(|e| CliError::Internal(e.to_string()))?;
    let (spec, comments) = match args {
        ConstructArgs::AllChannels { weights } => {
            let spec = build_all_channels_mix(d, c, &weights).map_err(construction_error)?;
            let forecast = forecast_invertibility(d, c, &weights).map_err(construction_error)?;
            let mut comments = vec![format!("all-channel construction: d = {d}, c = {c}, eigenvalues exp(-c t)")];
            for ch in &forecast.channels {
                comments.push(match (ch.verdict, ch.t_star) {
                    (InputKind::Noninvertible, Some(ts)) => {
                        format!("forecast: channel {} (x = {}) noninvertible, t* = {ts:.10}", ch.basis, ch.weight)
                    }
                    (InputKind::Semigroup, _) => format!("forecast: channel {} (x = {}) semigroup", ch.basis, ch.weight),
                    _ => format!("forecast: channel {} (x = {}) invertible, not a semigroup", ch.basis, ch.weight),
                });
            }
            comments.push(format!(
                "forecast: {} of {} inputs noninvertible",
                forecast.noninvertible_count(),
                d + 1
            ));
            (spec, comments)
        }
        ConstructArgs::SameChannel { a, q, basis } => {
            let q_fn = DecoherenceFunction::expression(&q).map_err(|e| CliError::Config(format!("--q {q:?}: {e}")))?;
            let spec = build_same_channel_mix(d, c, a, q_fn, basis, &grid).map_err(construction_error)?;
            let comments = vec![format!(
                "same-channel construction: d = {d}, c = {c}, a = {a}, q(t) = {q}, basis {basis}; eigenvalues exp(-c t)"
            )];
            (spec, comments)
        }
    };
    let text = render(&spec, Some(grid_spec), &comments);
    match out {
        Some(path) => {
            write_output(Some(path), &text)?;
            for c in &comments {
                println!("# {c}");
            }
            println!("wrote {}", path.display());
        }
        None => write_output(None, &text)?,
    }
    Ok(text)
}

#[derive(Debug, Serialize)]
struct MubVerification {
    dimension: usize,
    mub: chanmix::mubgen::MubReport,
    max_twirl_residual: f64,
    twirl_tolerance: f64,
    pass: bool,
}

fn verify_mub_report(d: usize) -> Result<MubVerification, CliError> {
    let family = construct_mub(d).map_err(|e| CliError::Validation(e.to_string()))?;
    let mub = verify_mub(&family, 1e-12);
    let w = weyl_set(d).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut twirl: f64 = 0.0;
    for a in w.labels() {
        for b in w.labels().filter(|b| *b != a) {
            for m in 1..d {
                twirl = twirl.max(twirl_residual(&w, a, b, m));
            }
        }
    }
    Ok(MubVerification {
        dimension: d,
        pass: mub.pass && twirl <= 1e-10,
        mub,
        max_twirl_residual: twirl,
        twirl_tolerance: 1e-10,
    })
}

#[derive(Debug, Serialize)]
struct CptpFailure {
    trial: usize,
    t: f64,
    min_choi_eigenvalue: f64,
    trace_preservation_defect: f64,
}

#[derive(Debug, Serialize)]
struct CptpVerification {
    dimension: usize,
    seed: u64,
    trials: usize,
    tolerance: f64,
    min_choi_eigenvalue: f64,
    max_trace_preservation_defect: f64,
    failures: Vec<CptpFailure>,
    pass: bool,
}

/// Choi positivity and trace preservation for random in-range mixtures.
fn verify_cptp(d: usize, trials: usize, seed: u64) -> Result<CptpVerification, CliError> {
    let w = weyl_set(d).map_err(|e| CliError::Validation(e.to_string()))?;
    let families = [Family::ExpRelax, Family::Expression, Family::Sampled];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_eig = f64::INFINITY;
    let mut max_tp: f64 = 0.0;
    let mut failures = Vec::new();
    for trial in 0..trials {
        let size = rng.gen_range(1..=d + 1);
        let spec: MixtureSpec = random_subset_mixture(d, size, families[trial % 3], &mut rng);
        let t = rng.gen_range(0.0..chanmix::semigroupforge::SCAN_T_MAX);
        let c = choi(&w, &spec, t).map_err(|e| CliError::Evaluation(e.to_string()))?;
        let v = psd_check(c.matrix(), PSD_TOL).map_err(|e| CliError::Internal(e.to_string()))?;
        let tp = c.trace_preservation_defect();
        min_eig = min_eig.min(v.min_eigenvalue);
        max_tp = max_tp.max(tp);
        if !v.psd || tp > PSD_TOL {
            failures.push(CptpFailure {
                trial,
                t,
                min_choi_eigenvalue: v.min_eigenvalue,
                trace_preservation_defect: tp,
            });
        }
    }
    Ok(CptpVerification {
        dimension: d,
        seed,
        trials,
        tolerance: PSD_TOL,
        min_choi_eigenvalue: min_eig,
        max_trace_preservation_defect: max_tp,
        pass: failures.is_empty(),
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyWhat {
    Mub,
    Theorem1,
    Theorem2,
    Cptp,
}

/// Runs a check, writes its JSON report and returns whether it passed.
pub fn verify(what: VerifyWhat, d: usize, trials: usize, seed: u64, out: Option<&Path>) -> Result<bool, CliError> {
    let (json, pass) = match what {
        VerifyWhat::Mub => {
            let r = verify_mub_report(d)?;
            (to_json(&r)?, r.pass)
        }
        VerifyWhat::Theorem1 => {
            let r = theorem1_scan(trials, seed);
            (to_json(&r)?, r.pass)
        }
        VerifyWhat::Theorem2 => {
            chanmix::mubgen::check_dimension(d).map_err(|e| CliError::Validation(e.to_string()))?;
            let r = theorem2_scan(d, trials, seed);
            (to_json(&r)?, r.pass)
        }
        VerifyWhat::Cptp => {
            let r = verify_cptp(d, trials, seed)?;
            (to_json(&r)?, r.pass)
        }
    };
    write_output(out, &json)?;
    if out.is_some() {
        println!("{}", if pass { "pass" } else { "FAIL" });
    }
    Ok(pass)
}

pub fn scan(
    d: usize,
    step: f64,
    family: ScanFamily,
    rate: f64,
    out: Option<&Path>,
    summary: Option<&Path>,
) -> Result<(), CliError> {
    let result = simplex_scan(d, step, family, rate).map_err(|e| match e {
        ScanError::Point { source, .. } => dynamics_error(source),
        other => CliError::Validation(other.to_string()),
    })?;
    write_output(out, &simplex_csv(&result))?;
    let text = to_json(&result.summary)?;
    match summary {
        Some(p) => write_output(Some(p), &text)?,
        None if out.is_some() => print!("{text}"),
        None => eprint!("{text}"),
    }
    Ok(())
}

pub fn dump_mub(d: usize, out_dir: Option<&Path>) -> Result<(), CliError> {
    let family = construct_mub(d).map_err(|e| CliError::Validation(e.to_string()))?;
    let w = weyl_set(d).map_err(|e| CliError::Validation(e.to_string()))?;
    match out_dir {
        Some(dir) => {
            let bases: PathBuf = dir.join(format!("mub_d{d}_bases.csv"));
            let unitaries: PathBuf = dir.join(format!("mub_d{d}_unitaries.csv"));
            write_output(Some(&bases), &bases_csv(&family))?;
            write_output(Some(&unitaries), &unitaries_csv(&w))?;
            println!("wrote {} and {}", bases.display(), unitaries.display());
        }
        None => {
            write_output(None, &bases_csv(&family))?;
            write_output(None, &unitaries_csv(&w))?;
        }
    }
    Ok(())
}
