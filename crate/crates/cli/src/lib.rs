//! Seeded experiment runner for the `lpplab` library.
//!
//! Every subcommand is also callable as a function, so the acceptance
//! suite can drive the same code paths without spawning processes.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

pub use commands::{
    bound, dominance, mix, selftest, shape, simulate, BoundOutput, DominanceOutput, MixRow, SelftestReport, Simulation,
    Summary,
};
pub use config::{ExperimentConfig, Format};

#[derive(Debug, Parser)]
#[command(name = "lpplab", version, about = "Last passage percolation under dependent couplings")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw replicates of a coupling and record the LPP times.
    Simulate(SimulateArgs),
    /// Analytic worst-case premium curve, or the generic bound of a subset system.
    Bound(BoundArgs),
    /// Both shape functions on a grid of directions.
    Shape(ShapeArgs),
    /// Stochastic and convex order verdicts between samples or against a law.
    Dominance(DominanceArgs),
    /// Variance of mixed sums: analytic against Monte Carlo.
    Mix(MixArgs),
    /// Reproducibility check across thread counts.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// `family[:key=value,...]`, e.g. `exp:theta=1`, `unif`, `pareto:alpha=2`.
    #[arg(long, default_value = "exp:theta=1")]
    pub marginal: String,
    /// `line:N`, `complete:N` or `point:N:M`.
    #[arg(long)]
    pub lattice: String,
    /// iid | convexmax | flat:polya | flat:rectangle | flat:natural | minmean:<copula> | maxmeanmixed
    #[arg(long, default_value = "convexmax")]
    pub coupling: String,
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample file (`replicate,value`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary file; stdout without one.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

impl SimulateArgs {
    pub fn new(marginal: &str, lattice: &str, coupling: &str, reps: u64, seed: u64) -> Self {
        Self {
            marginal: marginal.into(),
            lattice: lattice.into(),
            coupling: coupling.into(),
            reps,
            seed,
            out: None,
            summary: None,
            format: Format::Json,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long, default_value = "exp:theta=1")]
    pub marginal: String,
    /// Lattice for the analytic curve.
    #[arg(long, required_unless_present = "system")]
    pub lattice: Option<String>,
    /// Subset-system file with lines `k: n1 n2 ...` (1-based ids).
    #[arg(long, conflicts_with = "lattice")]
    pub system: Option<PathBuf>,
    /// Number of grid points.
    #[arg(long, default_value_t = 99)]
    pub grid: usize,
    #[arg(long)]
    pub x_min: Option<f64>,
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ShapeArgs {
    #[arg(long, default_value_t = 99)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DominanceArgs {
    /// Sample file of the candidate dominating variable.
    #[arg(long)]
    pub a: PathBuf,
    /// Second sample file.
    #[arg(long, required_unless_present = "law")]
    pub b: Option<PathBuf>,
    /// Compare against the worst-case law on this lattice instead.
    #[arg(long, conflicts_with = "b")]
    pub law: Option<String>,
    /// Marginal of the analytic law.
    #[arg(long, default_value = "exp:theta=1")]
    pub marginal: String,
    /// Slack in standard errors.
    #[arg(long, default_value_t = 4.0)]
    pub slack: f64,
    /// Number of pooled-quantile grid levels.
    #[arg(long, default_value_t = 99)]
    pub grid: usize,
    /// Curve table `x,H_a,se_a,H_b,se_b,margin_in_se`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Verdict report; stdout without one.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MixArgs {
    #[arg(long, default_value = "exp:theta=1")]
    pub marginal: String,
    /// Thresholds; `N` follows from `b / E[W | W < b]`.
    #[arg(long, value_delimiter = ',', conflicts_with = "n")]
    pub b: Vec<f64>,
    /// Sizes; the threshold follows from `N`.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Table atoms; grows with `N` by default.
    #[arg(long)]
    pub atoms: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 100_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 20_240_601)]
    pub seed: u64,
    /// Where the two sample files go; a temporary directory otherwise.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

/// Runs a parsed command line; the value is the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let go = || -> Result<i32> {
        match cli.command {
            Command::Simulate(a) => commands::run_simulate(&a).map(|_| 0),
            Command::Bound(a) => commands::run_bound(&a).map(|_| 0),
            Command::Shape(a) => commands::run_shape(&a).map(|_| 0),
            Command::Dominance(a) => commands::run_dominance(&a).map(|_| 0),
            Command::Mix(a) => commands::run_mix(&a).map(|_| 0),
            Command::Selftest(a) => commands::run_selftest(&a).map(|ok| if ok { 0 } else { 1 }),
        }
    };
    match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build()?.install(go),
        None => go(),
    }
}
