//! Argument parsing. Flags override the matching fields of `--config`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use scoremix_core::dynamics::{Scheme, SlidingRule};
use scoremix_core::geometry::SearchBox;

use crate::commands::{self, usage, CmdError};
use crate::config::{
    read_config, Builtin, MinimizersConfig, ModelConfig, PotentialConfig, SimMode, SimulateConfig, Suite,
    Sweep, VerifyConfig,
};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SCOREMIX_THREADS";

#[derive(Parser, Debug)]
#[command(name = "scoremix", version, about = "Mixed heat-flow scores and their small-time limits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate trajectories and write one CSV per path
    Simulate(SimulateArgs),
    /// Tabulate Φ_λ, F_λ(·,t), interface indicators and the limit field on a grid
    Potential(PotentialArgs),
    /// Enumerate critical points of Φ_λ for one or more λ
    Minimizers(MinimizersArgs),
    /// Run verification suites and write one report per suite
    Verify(VerifyArgs),
}

/// Comma-separated numbers; an alias so clap takes it as one value.
type Coords = Vec<f64>;

fn parse_point(s: &str) -> Result<Coords, String> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("`{c}`: {e}")))
        .collect()
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "euler" => Ok(Scheme::Euler),
        "rk4" => Ok(Scheme::Rk4),
        _ => Err(format!("unknown scheme `{s}` (euler, rk4)")),
    }
}

fn parse_sliding(s: &str) -> Result<SlidingRule, String> {
    match s {
        "project" => Ok(SlidingRule::Project),
        "chatter" => Ok(SlidingRule::Chatter),
        _ => Err(format!("unknown sliding rule `{s}` (project, chatter)")),
    }
}

#[derive(Args, Debug, Default)]
pub struct ModelArgs {
    /// Built-in dataset pair, used when --a1/--a2 are absent
    #[arg(long, value_enum)]
    pub dataset: Option<Builtin>,
    /// First support (CSV or JSON)
    #[arg(long)]
    pub a1: Option<PathBuf>,
    /// Second support (CSV or JSON)
    #[arg(long)]
    pub a2: Option<PathBuf>,
    /// Mixing weight λ ≥ 0
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Noise level ε ≥ 0
    #[arg(long, visible_alias = "epsilon")]
    pub eps: Option<f64>,
    /// Horizon T
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Samples per unit length of the segment dataset
    #[arg(long)]
    pub segment_density: Option<f64>,
}

impl ModelArgs {
    fn apply(&self, m: &mut ModelConfig) {
        if let Some(d) = self.dataset {
            m.dataset = d;
        }
        if self.a1.is_some() {
            m.a1 = self.a1.clone();
        }
        if self.a2.is_some() {
            m.a2 = self.a2.clone();
        }
        set(&mut m.lambda, self.lambda);
        set(&mut m.epsilon, self.eps);
        set(&mut m.horizon, self.horizon);
        set(&mut m.segment_density, self.segment_density);
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON config; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<SimMode>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Starting point, comma-separated; repeatable
    #[arg(long, value_parser = parse_point, allow_negative_numbers = true)]
    pub x0: Vec<Coords>,
    /// Grid of starts with this many nodes per axis
    #[arg(long)]
    pub z0_grid: Option<usize>,
    /// Number of Gaussian starts
    #[arg(long)]
    pub gaussian: Option<usize>,
    /// Mean of the Gaussian starts, comma-separated
    #[arg(long, value_parser = parse_point, allow_negative_numbers = true)]
    pub mean: Option<Coords>,
    /// Standard deviation of the Gaussian starts (default √(2T))
    #[arg(long)]
    pub std: Option<f64>,
    /// File of starting points (CSV or JSON)
    #[arg(long)]
    pub starts: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dtau: Option<f64>,
    /// Final similarity time; overrides --t-min
    #[arg(long)]
    pub tau_max: Option<f64>,
    /// Smallest physical time
    #[arg(long)]
    pub t_min: Option<f64>,
    /// euler or rk4
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    /// project or chatter
    #[arg(long, value_parser = parse_sliding)]
    pub sliding: Option<SlidingRule>,
    #[arg(long)]
    pub sliding_tol: Option<f64>,
    /// Merge radius for the limit summary
    #[arg(long)]
    pub cluster_radius: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PotentialArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Nodes per axis
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Lower corner, comma-separated
    #[arg(long, value_parser = parse_point, allow_negative_numbers = true, requires = "hi")]
    pub lo: Option<Coords>,
    /// Upper corner, comma-separated
    #[arg(long, value_parser = parse_point, allow_negative_numbers = true, requires = "lo")]
    pub hi: Option<Coords>,
    /// Time at which F_λ is tabulated; repeatable
    #[arg(long = "t")]
    pub ts: Vec<f64>,
    #[arg(long)]
    pub tie_tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MinimizersArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// λ values, comma-separated
    #[arg(long, value_parser = parse_point)]
    pub lambdas: Option<Coords>,
    /// Sweep `start,stop,steps`
    #[arg(long, value_parser = parse_point)]
    pub sweep: Option<Coords>,
    #[arg(long)]
    pub max_active: Option<usize>,
    /// Nodes per axis of the probing grid
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Skip the multi-start descent pass
    #[arg(long)]
    pub no_descent: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Suites to run, comma-separated or repeated
    #[arg(long = "suite", value_enum, value_delimiter = ',')]
    pub suites: Vec<Suite>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dtau: Option<f64>,
    #[arg(long)]
    pub mc_paths: Option<usize>,
    #[arg(long)]
    pub mc_p: Option<f64>,
    #[arg(long)]
    pub mc_bins: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn base<T: Default + for<'de> serde::Deserialize<'de>>(path: &Option<PathBuf>) -> Result<T, CmdError> {
    match path {
        Some(p) => read_config(p).map_err(usage),
        None => Ok(T::default()),
    }
}

impl SimulateArgs {
    pub fn resolve(&self) -> Result<SimulateConfig, CmdError> {
        let mut c: SimulateConfig = base(&self.config)?;
        set(&mut c.mode, self.mode);
        self.model.apply(&mut c.model);
        if !self.x0.is_empty() {
            c.starts.x0 = self.x0.clone();
        }
        if self.z0_grid.is_some() {
            c.starts.z0_grid = self.z0_grid;
        }
        if self.gaussian.is_some() {
            c.starts.gaussian = self.gaussian;
        }
        if self.mean.is_some() {
            c.starts.mean = self.mean.clone();
        }
        if self.std.is_some() {
            c.starts.std = self.std;
        }
        if self.starts.is_some() {
            c.starts.file = self.starts.clone();
        }
        let i = &mut c.integrator;
        set(&mut i.seed, self.seed);
        set(&mut i.dtau, self.dtau);
        if self.tau_max.is_some() {
            i.tau_max = self.tau_max;
        }
        set(&mut i.t_min, self.t_min);
        set(&mut i.scheme, self.scheme);
        set(&mut i.sliding, self.sliding);
        set(&mut i.sliding_tol, self.sliding_tol);
        set(&mut c.cluster_radius, self.cluster_radius);
        set(&mut c.out, self.out.clone());
        Ok(c)
    }
}

impl PotentialArgs {
    pub fn resolve(&self) -> Result<PotentialConfig, CmdError> {
        let mut c: PotentialConfig = base(&self.config)?;
        self.model.apply(&mut c.model);
        set(&mut c.grid_n, self.grid_n);
        if let (Some(lo), Some(hi)) = (&self.lo, &self.hi) {
            c.bounds = Some(SearchBox { lo: lo.clone(), hi: hi.clone() });
        }
        if !self.ts.is_empty() {
            c.ts = self.ts.clone();
        }
        set(&mut c.tie_tol, self.tie_tol);
        set(&mut c.out, self.out.clone());
        Ok(c)
    }
}

impl MinimizersArgs {
    pub fn resolve(&self) -> Result<MinimizersConfig, CmdError> {
        let mut c: MinimizersConfig = base(&self.config)?;
        self.model.apply(&mut c.model);
        set(&mut c.lambdas, self.lambdas.clone());
        if let Some(s) = &self.sweep {
            let [start, stop, steps] = s[..] else {
                return Err(usage(anyhow::anyhow!("--sweep takes start,stop,steps")));
            };
            if !(steps >= 1.0 && steps.fract() == 0.0) {
                return Err(usage(anyhow::anyhow!("sweep steps must be a positive integer")));
            }
            c.sweep = Some(Sweep { start, stop, steps: steps as usize });
        }
        set(&mut c.enumeration.max_active, self.max_active);
        set(&mut c.enumeration.grid_n, self.grid_n);
        if self.no_descent {
            c.enumeration.descent = false;
        }
        set(&mut c.out, self.out.clone());
        Ok(c)
    }
}

impl VerifyArgs {
    pub fn resolve(&self) -> Result<VerifyConfig, CmdError> {
        let mut c: VerifyConfig = base(&self.config)?;
        self.model.apply(&mut c.model);
        if !self.suites.is_empty() {
            c.suites = self.suites.clone();
        }
        set(&mut c.seed, self.seed);
        set(&mut c.dtau, self.dtau);
        set(&mut c.mc_paths, self.mc_paths);
        set(&mut c.mc_p, self.mc_p);
        set(&mut c.mc_bins, self.mc_bins);
        set(&mut c.out, self.out.clone());
        Ok(c)
    }
}

fn dispatch(cmd: &Command) -> commands::CmdResult {
    match cmd {
        Command::Simulate(a) => commands::simulate::run(&a.resolve()?),
        Command::Potential(a) => commands::potential::run(&a.resolve()?),
        Command::Minimizers(a) => commands::minimizers::run(&a.resolve()?),
        Command::Verify(a) => commands::verify::run(&a.resolve()?),
    }
}

fn init_threads() -> Result<(), CmdError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| usage(anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 1 on runtime failure or a failed hard gate, 2 on usage errors.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = init_threads().and_then(|()| dispatch(&cli.command));
    match result {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("scoremix: one or more hard gates failed");
            1
        }
        Err(e) => {
            eprintln!("scoremix: {e}");
            e.code()
        }
    }
}
