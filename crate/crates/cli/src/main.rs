use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmot_core::lp::PivotRule;

mod commands;
mod rundir;

/// Multi-marginal transport and matching with hedonic surplus.
///
/// Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 a reproduction
/// or consistency check failed.
#[derive(Debug, Parser)]
#[command(name = "mmot", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run manifest (JSON).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory; defaults to the manifest's `output_dir`, then `mmot-out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the manifest seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also run the entropic solver at this ε.
    #[arg(long, global = true)]
    pub entropic_eps: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub pivot: Option<Pivot>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Pivot {
    Bland,
    Dantzig,
}

impl From<Pivot> for PivotRule {
    fn from(p: Pivot) -> Self {
        match p {
            Pivot::Bland => PivotRule::Bland,
            Pivot::Dantzig => PivotRule::Dantzig,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact (and optionally entropic) multi-marginal transport with diagnostics.
    SolveMk,
    /// Optimal contract distribution via the multi-marginal solve and by fixed-point iteration.
    SolveMam,
    /// Compare the multi-marginal and matching formulations on one instance.
    VerifyEquivalence,
    /// Sample the surplus hypotheses and evaluate condition (III) at given tuples.
    CheckSurplus,
    /// Run the worked-example reproductions.
    PaperRepro,
    /// Write a manifest for a seeded random instance.
    GenInstance(GenArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub atoms: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub hi: f64,
    #[arg(long, value_enum, default_value_t = GenOracle::Quadratic)]
    pub oracle: GenOracle,
    /// Draw random weights instead of uniform ones.
    #[arg(long)]
    pub random_weights: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenOracle {
    Quadratic,
    Brenier,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    ExitCode::from(commands::run(&cli))
}
