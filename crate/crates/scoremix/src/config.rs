//! Run configurations. Each subcommand reads one of these from `--config`
//! and lets explicit flags override individual fields.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use scoremix_core::datasets;
use scoremix_core::dynamics::{Scheme, SlidingRule, DEFAULT_DTAU, DEFAULT_SLIDING_TOL, DEFAULT_T_MIN};
use scoremix_core::geometry::{EnumerationConfig, SearchBox};
use scoremix_core::measures::DEFAULT_TIE_TOL;
use scoremix_core::{EmpiricalMeasure, IntegratorConfig, MixedScoreModel};

use crate::io::{self, MeasureFormat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// A₁ = {-1, 1, 2}, A₂ = {0, 1.5, 5}
    Line,
    /// Two three-point sets in the plane
    Plane,
    /// Horizontal and vertical segment pairs, sampled
    Segments,
}

/// A measure with the bytes it was read from, for hashing.
pub struct LoadedMeasure {
    pub measure: EmpiricalMeasure,
    pub source: String,
    pub hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Built-in pair used when `a1`/`a2` are absent.
    pub dataset: Builtin,
    pub a1: Option<PathBuf>,
    pub a2: Option<PathBuf>,
    pub lambda: f64,
    pub epsilon: f64,
    pub horizon: f64,
    /// Samples per unit length for the segment dataset.
    pub segment_density: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dataset: Builtin::Line,
            a1: None,
            a2: None,
            lambda: 0.5,
            epsilon: 0.0,
            horizon: 1.0,
            segment_density: datasets::SEGMENT_DENSITY,
        }
    }
}

fn load_file(path: &Path) -> Result<LoadedMeasure> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(LoadedMeasure {
        measure: io::load_measure(path, MeasureFormat::from_path(path))?,
        source: path.display().to_string(),
        hash: io::content_hash(&bytes),
    })
}

fn builtin(m: EmpiricalMeasure, name: &str) -> LoadedMeasure {
    let hash = io::content_hash(io::measure_to_csv(&m).as_bytes());
    LoadedMeasure { measure: m, source: format!("builtin:{name}"), hash }
}

impl ModelConfig {
    pub fn load_measures(&self) -> Result<(LoadedMeasure, LoadedMeasure)> {
        match (&self.a1, &self.a2) {
            (Some(a), Some(b)) => Ok((load_file(a)?, load_file(b)?)),
            (None, None) => Ok(match self.dataset {
                Builtin::Line => (builtin(datasets::line_a1(), "line/A1"), builtin(datasets::line_a2(), "line/A2")),
                Builtin::Plane => {
                    (builtin(datasets::plane_a1(), "plane/A1"), builtin(datasets::plane_a2(), "plane/A2"))
                }
                Builtin::Segments => (
                    builtin(datasets::segments_horizontal(self.segment_density)?, "segments/A1"),
                    builtin(datasets::segments_vertical(self.segment_density)?, "segments/A2"),
                ),
            }),
            _ => bail!("--a1 and --a2 must be given together"),
        }
    }

    pub fn build(&self) -> Result<(MixedScoreModel, Vec<InputRecord>)> {
        let (a, b) = self.load_measures()?;
        let inputs = vec![
            InputRecord { role: "a1".into(), source: a.source, sha256: a.hash },
            InputRecord { role: "a2".into(), source: b.source, sha256: b.hash },
        ];
        let model = MixedScoreModel::new(a.measure, b.measure, self.lambda, self.horizon, self.epsilon)?;
        Ok((model, inputs))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub source: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSettings {
    pub dtau: f64,
    /// Overrides `log(T / t_min)`.
    pub tau_max: Option<f64>,
    pub t_min: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub sliding: SlidingRule,
    pub sliding_tol: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            dtau: DEFAULT_DTAU,
            tau_max: None,
            t_min: DEFAULT_T_MIN,
            seed: 0,
            scheme: Scheme::Euler,
            sliding: SlidingRule::Project,
            sliding_tol: DEFAULT_SLIDING_TOL,
        }
    }
}

impl IntegratorSettings {
    pub fn resolve(&self, horizon: f64) -> Result<IntegratorConfig> {
        if !(self.t_min > 0.0 && self.t_min < horizon) {
            bail!("t_min must satisfy 0 < t_min < T");
        }
        let cfg = IntegratorConfig {
            dtau: self.dtau,
            tau_max: self.tau_max.unwrap_or((horizon / self.t_min).ln()),
            seed: self.seed,
            sliding_tol: self.sliding_tol,
            scheme: self.scheme,
            sliding: self.sliding,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Rescaled probability-flow ODE
    Ode,
    /// Rescaled noisy dynamics
    Sde,
    /// Characteristic ODE in physical time
    Physical,
    /// Limiting differential inclusion
    Limit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StartSpec {
    /// Explicit starting points.
    pub x0: Vec<Vec<f64>>,
    /// Nodes per axis of a grid over the data box.
    pub z0_grid: Option<usize>,
    /// Number of Gaussian draws `N(mean, std²)`.
    pub gaussian: Option<usize>,
    pub mean: Option<Vec<f64>>,
    pub std: Option<f64>,
    /// CSV or JSON point file.
    pub file: Option<PathBuf>,
}

impl Default for StartSpec {
    fn default() -> Self {
        Self { x0: Vec::new(), z0_grid: None, gaussian: None, mean: None, std: None, file: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub mode: SimMode,
    pub model: ModelConfig,
    pub integrator: IntegratorSettings,
    pub starts: StartSpec,
    /// Terminal states closer than this are merged in the limit summary.
    pub cluster_radius: f64,
    pub out: PathBuf,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            mode: SimMode::Ode,
            model: ModelConfig::default(),
            integrator: IntegratorSettings::default(),
            starts: StartSpec::default(),
            cluster_radius: 5e-2,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub model: ModelConfig,
    /// Nodes per axis.
    pub grid_n: usize,
    /// Defaults to the data box widened by a quarter.
    pub bounds: Option<SearchBox>,
    /// Times at which `F_λ(·, t)` is tabulated.
    pub ts: Vec<f64>,
    pub tie_tol: f64,
    pub out: PathBuf,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            grid_n: 101,
            bounds: None,
            ts: vec![1e-2],
            tie_tol: DEFAULT_TIE_TOL,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.start];
        }
        (0..self.steps)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimizersConfig {
    pub model: ModelConfig,
    /// Empty means the model's λ alone.
    pub lambdas: Vec<f64>,
    pub sweep: Option<Sweep>,
    pub enumeration: EnumerationConfig,
    pub out: PathBuf,
}

impl Default for MinimizersConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            lambdas: Vec::new(),
            sweep: None,
            enumeration: EnumerationConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Varadhan,
    Gradient,
    Rate,
    Lyapunov,
    Hj,
    Semiconcavity,
    Energy,
    Mc,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Varadhan => "varadhan",
            Suite::Gradient => "gradient",
            Suite::Rate => "rate",
            Suite::Lyapunov => "lyapunov",
            Suite::Hj => "hj",
            Suite::Semiconcavity => "semiconcavity",
            Suite::Energy => "energy",
            Suite::Mc => "mc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub model: ModelConfig,
    pub suites: Vec<Suite>,
    pub seed: u64,
    pub dtau: f64,
    pub mc_paths: usize,
    pub mc_p: f64,
    pub mc_bins: usize,
    pub out: PathBuf,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            suites: Vec::new(),
            seed: 0,
            dtau: DEFAULT_DTAU,
            mc_paths: 10_000,
            mc_p: 2.0,
            mc_bins: 256,
            out: PathBuf::from("out"),
        }
    }
}

/// Parses a config file, rejecting unknown keys.
pub fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
