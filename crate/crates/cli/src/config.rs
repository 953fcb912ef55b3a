//! Run configuration: TOML on disk, [`MixtureSpec`] in memory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use chanmix::channelcore::{DecoherenceFunction, MixtureSpec};
use chanmix::dynamics::{TimeGrid, Tolerances};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: System,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub tolerances: Option<ToleranceSpec>,
    #[serde(default)]
    pub output: Output,
    #[serde(rename = "component", default)]
    pub components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct System {
    pub dimension: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub semigroup: Option<f64>,
    pub cp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "default_trajectory")]
    pub trajectory: PathBuf,
    #[serde(default = "default_classification")]
    pub classification: PathBuf,
}

impl Default for Output {
    fn default() -> Self {
        Output {
            trajectory: default_trajectory(),
            classification: default_classification(),
        }
    }
}

fn default_trajectory() -> PathBuf {
    PathBuf::from("trajectory.csv")
}

fn default_classification() -> PathBuf {
    PathBuf::from("classification.json")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    pub basis: usize,
    pub p: PSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PSpec {
    ExpRelax { scale: f64, rate: f64 },
    Expression { expr: String },
    Samples { times: Vec<f64>, values: Vec<f64> },
}

impl PSpec {
    fn build(&self, index: usize) -> Result<DecoherenceFunction, CliError> {
        match self {
            PSpec::ExpRelax { scale, rate } => Ok(DecoherenceFunction::exp_relax(*scale, *rate)),
            PSpec::Expression { expr } => DecoherenceFunction::expression(expr).map_err(|e| {
                let at = e.position().map(|p| format!(" (column {})", p + 1)).unwrap_or_default();
                CliError::Config(format!("component {}: p.expr {expr:?}: {e}{at}", index + 1))
            }),
            PSpec::Samples { times, values } => DecoherenceFunction::sampled(times.clone(), values.clone())
                .map_err(|e| CliError::Config(format!("component {}: p samples: {e}", index + 1))),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn mixture(&self) -> Result<MixtureSpec, CliError> {
        let parts = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| Ok((c.weight, c.basis, c.p.build(i)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(MixtureSpec::new(self.system.dimension, parts))
    }

    pub fn time_grid(&self, spec: &MixtureSpec) -> Result<TimeGrid, CliError> {
        match self.grid {
            Some(g) => {
                if !(g.t_max > 0.0 && g.t_max.is_finite()) {
                    return Err(CliError::Config(format!("grid.t_max must be positive, got {}", g.t_max)));
                }
                TimeGrid::uniform(g.t_max, g.points).map_err(|e| CliError::Config(format!("grid: {e}")))
            }
            None => Ok(TimeGrid::default_for(spec)),
        }
    }

    pub fn tolerances(&self, spec: &MixtureSpec) -> Tolerances {
        let mut tol = Tolerances::for_spec(spec);
        if let Some(t) = self.tolerances {
            tol.semigroup = t.semigroup.unwrap_or(tol.semigroup);
            tol.cp = t.cp.unwrap_or(tol.cp);
        }
        tol
    }
}

/// TOML rendering of a mixture. Functions without an expression form are
/// written as samples on the grid.
pub fn render(spec: &MixtureSpec, grid: Option<GridSpec>, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    if !comments.is_empty() {
        out.push('\n');
    }
    let _ = writeln!(out, "[system]\ndimension = {}\n", spec.dimension);
    if let Some(g) = grid {
        let _ = writeln!(out, "[grid]\nt_max = {:?}\npoints = {}\n", g.t_max, g.points);
    }
    for c in &spec.components {
        let _ = writeln!(out, "[[component]]\nweight = {:?}\nbasis = {}", c.weight, c.channel.basis);
        match &c.channel.p {
            DecoherenceFunction::ExpRelax { scale, rate } => {
                let _ = writeln!(out, "p = {{ kind = \"exp_relax\", scale = {scale:?}, rate = {rate:?} }}");
            }
            DecoherenceFunction::SampledGrid(m) => {
                let _ = writeln!(
                    out,
                    "p = {{ kind = \"samples\", times = {:?}, values = {:?} }}",
                    m.times(),
                    m.values()
                );
            }
            DecoherenceFunction::Expression { source, .. } => {
                let _ = writeln!(out, "p = {{ kind = \"expression\", expr = {} }}", toml_string(source));
            }
            other => {
                let expr = other.to_expression().unwrap_or_default();
                let _ = writeln!(out, "p = {{ kind = \"expression\", expr = {} }}", toml_string(&expr));
            }
        }
        out.push('\n');
    }
    out
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}
