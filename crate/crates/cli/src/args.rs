use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use slan_core::data::ImputeMode;
use slan_core::model::{AggregationKind, ConcatMode, InitKind};

#[derive(Debug, Parser)]
#[command(name = "slan", version, about = "Train and study switch-scheduled recurrent models on irregular time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and write its train/val/test splits.
    Generate(GenerateArgs),
    /// Train one model per seed and report test metrics.
    Train(RunArgs),
    /// Evaluate the checkpoints of a previous training run on the test split.
    Eval(EvalArgs),
    /// Compare aggregation, imputation or concat-layer variants.
    Ablate(AblateArgs),
    /// Shorthand for `ablate agg`.
    AblateAgg(RunArgs),
    /// Shorthand for `ablate impute`.
    AblateImpute(RunArgs),
    /// Shorthand for `ablate concat`.
    AblateConcat(RunArgs),
    /// Retrain after randomly dropping a share of the observations.
    DropStudy(StudyArgs),
    /// Retrain on growing prefixes of the training split.
    ScaleStudy(StudyArgs),
    /// Attention-based sensor importance of an attention checkpoint.
    Importance(ImportanceArgs),
    /// Per-epoch wall time as the number of steps grows.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output directory for train.jsonl, val.jsonl, test.jsonl and meta.json.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with generator settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sensors: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub missing_rate: Option<f64>,
    /// Make the observation probability depend on the latent value.
    #[arg(long)]
    pub informative: bool,
    /// Noise-free trajectories with unit class drift.
    #[arg(long)]
    pub separable: bool,
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub positive_rate: Option<f64>,
    #[arg(long)]
    pub statics: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Training settings shared by every command that trains.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainOverrides {
    /// TOML file with training settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated seeds, one run per seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub t2v_dim: Option<usize>,
    /// mean, max or attention.
    #[arg(long)]
    pub agg: Option<AggregationKind>,
    /// none, ffill, mean or interpolation.
    #[arg(long)]
    pub impute: Option<ImputeMode>,
    /// both, global or local.
    #[arg(long)]
    pub concat: Option<ConcatMode>,
    /// Share of observations removed from every split before training.
    #[arg(long)]
    pub drop: Option<f64>,
    /// zeros or random.
    #[arg(long)]
    pub init: Option<InitKind>,
    /// Global gradient-norm clip.
    #[arg(long)]
    pub clip: Option<f64>,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Directory holding train.jsonl, val.jsonl, test.jsonl and meta.json.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory of a `train` run containing checkpoint_<seed>.bin files.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub impute: Option<ImputeMode>,
    #[arg(long)]
    pub drop: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblationKind {
    Agg,
    Impute,
    Concat,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(value_enum)]
    pub kind: AblationKind,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated fractions; each command has its own default grid.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint trained with attention aggregation.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub impute: Option<ImputeMode>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated maximum step counts.
    #[arg(long, value_delimiter = ',', default_value = "25,50")]
    pub steps: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub sensors: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 8)]
    pub t2v_dim: usize,
    /// Timed epochs per setting; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}
