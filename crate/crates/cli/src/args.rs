use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "vid", version, about = "Two-view text classification with view distillation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labeled/unlabeled/test corpus and its manifest.
    Generate(GenerateArgs),
    /// Train both view students on a corpus and checkpoint them.
    Train(TrainArgs),
    /// Score a trained run on a labeled test file.
    Eval(EvalArgs),
    /// Compare baselines, view distillation and its ablations over seeds.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 2000)]
    pub labeled: usize,
    #[arg(long, default_value_t = 8000)]
    pub unlabeled: usize,
    #[arg(long, default_value_t = 1000)]
    pub test: usize,
    /// Fraction of positive documents in the labeled and test sets.
    #[arg(long = "pos-rate", default_value_t = 0.092)]
    pub pos_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, relative to the run root.
    #[arg(long, default_value = "corpus")]
    pub out: PathBuf,
}

/// Experiment settings; each flag overrides the same key in `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    /// key=value settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub teacher_epochs: Option<usize>,
    #[arg(long)]
    pub distill_epochs: Option<usize>,
    #[arg(long)]
    pub finetune_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Assert teacher immutability and label-transfer round trips while running.
    #[arg(long)]
    pub check_invariants: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `vid generate` (or holding the same files).
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub model: ModelFlags,
    /// Share of the labeled set held out for validation metrics.
    #[arg(long)]
    pub valid_fraction: Option<f64>,
    /// Output directory, relative to the run root.
    #[arg(long, default_value = "train")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory written by `vid train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Labeled corpus file to score.
    #[arg(long)]
    pub test: PathBuf,
    /// Also report each view's student alone.
    #[arg(long)]
    pub per_view: bool,
    /// Load checkpoints even if their config hash differs from the run's.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub model: ModelFlags,
    /// Number of model seeds, counting up from the configured seed.
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    /// Run only the named methods (repeatable), e.g. `combined` or `P-Doc-F-Drug`.
    #[arg(long)]
    pub only: Vec<String>,
    /// Output directory, relative to the run root.
    #[arg(long, default_value = "ablate")]
    pub out: PathBuf,
}
