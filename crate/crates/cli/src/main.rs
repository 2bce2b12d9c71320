//! `treequad`: Shapley values and interaction indices for tree ensembles.
//!
//! Exit codes: 0 success, 1 validation failure (model invariant, efficiency
//! check, oracle spot-check), 2 unreadable or malformed input, 3 unmet
//! precondition (e.g. an order above the model's unique-feature depth).

mod commands;
mod data;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "treequad", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shapley values (order 1: columns f0..f{F-1},bias[,efficiency_residual])
    /// or raw interaction indices of a higher order (sparse records).
    Explain(ExplainArgs),
    /// Pairwise matrix (order 2: columns m{i}_{j} row-major, then bias) or
    /// sparse records sample,features,value for order 3 and above.
    Interactions(InteractionArgs),
    /// Efficiency error against depth on generated ensembles. CSV columns:
    /// depth,points,max_efficiency_error,mean_efficiency_error,wall_time_s,
    /// model_seed,sample_seed,trees,threads
    Stability(StabilityArgs),
    /// Wall time against interaction order. CSV columns:
    /// order,points,wall_time_s,nonzero_keys,threads
    Scaling(ScalingArgs),
    /// Check model invariants, efficiency and (for small models) agreement
    /// with exact enumeration.
    Validate(ValidateArgs),
    /// List the registered attribution methods.
    Methods,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Args)]
pub struct ModelArgs {
    /// Canonical JSON model, or an XGBoost JSON dump with --import-xgboost-dump.
    #[arg(long)]
    pub model: PathBuf,
    /// Treat --model as an XGBoost `dump_model(..., with_stats=True)` JSON dump.
    #[arg(long)]
    pub import_xgboost_dump: bool,
    /// Base score added to every prediction of an imported dump.
    #[arg(long, requires = "import_xgboost_dump", allow_hyphen_values = true)]
    pub base_score: Option<f64>,
    /// Feature count of an imported dump; defaults to the largest split index + 1.
    #[arg(long, requires = "import_xgboost_dump")]
    pub num_features: Option<usize>,
    /// Output groups in an imported multiclass dump (trees are interleaved).
    #[arg(long, default_value_t = 1, requires = "import_xgboost_dump")]
    pub num_groups: usize,
    /// Output group to explain, in 0..num-groups.
    #[arg(long, default_value_t = 0, requires = "import_xgboost_dump")]
    pub group: usize,
    /// JSON object mapping column / split names to feature indices.
    #[arg(long)]
    pub feature_map: Option<PathBuf>,
}

#[derive(Args)]
pub struct EngineArgs {
    /// Gauss-Legendre points.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..=64))]
    pub points: u64,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Attribution method (see `treequad methods`).
    #[arg(long, default_value = "quadrature")]
    pub method: String,
}

#[derive(Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Headered CSV, one row per sample; empty cells are missing values.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub order: u64,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Accepted for reproducible scripts; explanation involves no randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Append each row's efficiency residual and fail if any exceeds 1e-6.
    #[arg(long)]
    pub check_efficiency: bool,
}

#[derive(Args)]
pub struct InteractionArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub order: u64,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct StabilityArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [8, 16, 24, 32, 40, 48])]
    pub depths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [6, 8, 16])]
    pub rule_sizes: Vec<usize>,
    #[arg(long, default_value_t = 784)]
    pub features: usize,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 4)]
    pub trees: usize,
    #[arg(long, default_value_t = 0.05)]
    pub repeat_prob: f64,
    #[arg(long, default_value_t = 512)]
    pub max_leaves: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScalingArgs {
    /// Model to time; a generated ensemble is used when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset whose first row is explained; a uniform sample when absent.
    #[arg(long, requires = "model")]
    pub data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4, 5, 6])]
    pub orders: Vec<usize>,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..=64))]
    pub points: u64,
    #[arg(long, default_value_t = 18)]
    pub depth: usize,
    #[arg(long, default_value_t = 200)]
    pub features: usize,
    #[arg(long, default_value_t = 4)]
    pub trees: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Seed for the spot-check samples.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples drawn for the efficiency and oracle checks.
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Explain(args) => commands::explain(&args),
        Command::Interactions(args) => commands::interactions(&args),
        Command::Stability(args) => commands::stability(&args),
        Command::Scaling(args) => commands::scaling(&args),
        Command::Validate(args) => commands::validate(&args),
        Command::Methods => commands::methods(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}
