use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Mean–tail-Gini portfolio analytics on return panels.
#[derive(Debug, Parser)]
#[command(name = "tailgini", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-asset risk statistics at each prudence level.
    Stats(StatsArgs),
    /// Pearson, Gini and tail Gini correlation matrices.
    Corr(CorrArgs),
    /// Efficient frontier over a set of target means.
    Frontier(FrontierArgs),
    /// Generalized Pareto fit of each asset's left tail.
    Gpd(GpdArgs),
    /// Tail Gini correlation asymmetry of every asset pair over a level grid.
    CheckExchangeability(ExchangeabilityArgs),
    /// Writes a seeded synthetic return panel.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriceMode {
    /// Cells are returns in percent.
    Returns,
    /// Cells are prices; simple percent returns.
    Simple,
    /// Cells are prices; log percent returns.
    Log,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input CSV with a `date` column followed by one column per asset.
    /// Repeat to inner-join several files on date.
    #[arg(long, short, required = true)]
    pub input: Vec<PathBuf>,
    /// How input cells are interpreted.
    #[arg(long, value_enum, default_value = "returns")]
    pub price_mode: PriceMode,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Prudence level in (0, 1); repeatable.
    #[arg(long, short, default_values_t = [0.05, 0.10])]
    pub prudence: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, short, default_values_t = [0.05, 0.10])]
    pub prudence: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveKind {
    Variance,
    Gmd,
    TailGini,
    TailSd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Closed form under the symmetrized risk matrix.
    Analytic,
    /// Constraint-preserving local search on the sample.
    Numeric,
    Both,
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Risk objective; repeatable. With two or more, distortion rates
    /// against the first are reported.
    #[arg(long, value_enum, default_values_t = [ObjectiveKind::TailGini])]
    pub objective: Vec<ObjectiveKind>,
    /// Prudence level for tail objectives; repeatable.
    #[arg(long, short, default_values_t = [0.05])]
    pub prudence: Vec<f64>,
    /// Target means: a comma list (`0.05,0.1`) or an inclusive range
    /// `start:end:step`.
    #[arg(long, short, allow_hyphen_values = true)]
    pub targets: String,
    #[arg(long, value_enum, default_value = "numeric")]
    pub method: Method,
    /// Forbid negative weights (numeric method only).
    #[arg(long)]
    pub long_only: bool,
    /// Fixed step size; stop once the improvement falls below the threshold.
    #[arg(long)]
    pub paper_faithful: bool,
    /// Initial search step.
    #[arg(long, default_value_t = 0.001)]
    pub step: f64,
    /// Convergence threshold on the objective change.
    #[arg(long, default_value_t = 0.00001)]
    pub threshold: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    /// Repair a non-positive-definite analytic risk matrix with a small ridge.
    #[arg(long)]
    pub ridge: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GpdArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, short, default_values_t = [0.10])]
    pub prudence: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ExchangeabilityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Grid level; repeatable.
    #[arg(long, short, default_values_t = [0.01, 0.025, 0.05, 0.10, 0.20])]
    pub prudence: Vec<f64>,
    /// Largest admissible `|Γ_ij - Γ_ji|`.
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Equicorrelated Gaussian assets.
    Gaussian,
    /// Six assets, three with GPD crash shocks.
    HeavyTailed,
    /// Two columns from one uniform.
    Comonotone,
    /// Two columns from reflected uniforms.
    Antimonotone,
    /// One column of negated GPD draws, so the left tail is Pareto.
    Gpd,
    /// The fixed five-point two-asset example.
    Example,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    /// Number of observations.
    #[arg(long, short, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of Gaussian assets.
    #[arg(long, default_value_t = 3)]
    pub assets: usize,
    /// Pairwise Gaussian correlation.
    #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
    pub rho: f64,
    /// GPD shape.
    #[arg(long, default_value_t = 0.6, allow_hyphen_values = true)]
    pub shape: f64,
    /// GPD scale.
    #[arg(long, default_value_t = 2.0)]
    pub scale: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}
