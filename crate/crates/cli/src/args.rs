use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cyclecast::dataset::TARGET_COLUMN;
use cyclecast::EncodingStrategy;

#[derive(Debug, Parser)]
#[command(name = "cyclecast", version, about = "Cyclic-encoding load forecasting experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Seed for data generation, sampling and tuning.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Directory for reports, models and traces.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// FeatureSpec JSON file (defaults to the built-in spec).
    #[arg(long, global = true)]
    pub features: Option<PathBuf>,
    /// Temporal encoding: ordinal, onehot or sinusoidal.
    #[arg(long, global = true, value_parser = parse_encoding)]
    pub encoding: Option<EncodingStrategy>,
    /// Omit wall-clock fields so reports are reproducible byte for byte.
    #[arg(long, global = true)]
    pub no_timing: bool,
}

fn parse_encoding(s: &str) -> Result<EncodingStrategy, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic hourly load series as CSV.
    Synth(SynthArgs),
    /// Compare encodings across learner configurations on a hold-out split.
    Bench(BenchArgs),
    /// Remove one feature group at a time and report the RMSE change.
    Ablation(AblationArgs),
    /// Bayesian optimisation of booster hyper-parameters by cross-validation.
    Tune(TuneArgs),
    /// Score a CSV with a saved model bundle.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SyntheticArgs {
    /// Number of hourly rows to generate when no --data is given.
    #[arg(long, default_value_t = 8760)]
    pub hours: usize,
    #[arg(long, default_value_t = 2.0)]
    pub base_level: f64,
    #[arg(long, default_value_t = 1.0)]
    pub daily: f64,
    #[arg(long, default_value_t = 0.5)]
    pub weekly: f64,
    #[arg(long, default_value_t = 0.0)]
    pub trend: f64,
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV; a synthetic series is generated when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "timestamp")]
    pub time_col: String,
    #[arg(long, default_value = TARGET_COLUMN)]
    pub target: String,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    /// Output file (defaults to OUT/synthetic.csv).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LearnerArgs {
    /// JSON object overriding fields of every learner configuration.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Fraction of trailing rows held out for testing.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// Learner configurations: xgb-style, lgbm-style, default.
    #[arg(long, value_delimiter = ',', default_value = "xgb-style,lgbm-style")]
    pub learners: Vec<String>,
    /// Skip the ablation section.
    #[arg(long)]
    pub no_ablation: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AblationArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub learner_args: LearnerArgs,
    #[arg(long, default_value = "xgb-style")]
    pub learner: String,
    /// Groups to remove, one run each.
    #[arg(long, value_delimiter = ',', default_value = "sinusoidal,rolling_stats,lag_features")]
    pub groups: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Total trials, including the initial design.
    #[arg(long, default_value_t = 20)]
    pub budget: usize,
    /// Initial trials: the default parameters plus a Latin-hypercube design.
    #[arg(long, default_value_t = 5)]
    pub init: usize,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Validation rows per fold.
    #[arg(long, default_value_t = 168)]
    pub fold_width: usize,
    /// Skip the one-at-a-time reversion runs after tuning.
    #[arg(long)]
    pub no_attribution: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Model bundle written by `bench`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "timestamp")]
    pub time_col: String,
    /// Output file (defaults to OUT/predictions.csv).
    #[arg(long)]
    pub output: Option<PathBuf>,
}
