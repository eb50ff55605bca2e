//! Command-line surface. Every flag maps onto one field of [`RunConfig`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{
    CkaSection, DataSection, GradcheckSection, OutputSection, RunConfig, SelectSection, SynthSection, TrainSection,
};

#[derive(Debug, Parser)]
#[command(
    name = "lingen",
    version,
    about = "Source selection and dual-encoder training for cross-variety transfer",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank candidate source varieties against a target and pick a pair.
    SelectSources(SelectArgs),
    /// Train a model and write its checkpoint and loss trace.
    Train(TrainArgs),
    /// Score a checkpoint on test corpora.
    Evaluate(EvaluateArgs),
    /// Pairwise linear CKA between varieties.
    AnalyzeCka(CkaArgs),
    /// Generate a synthetic suite of varieties.
    Synth(SynthArgs),
    /// Finite-difference verification of every analytic gradient.
    Gradcheck(GradcheckArgs),
    /// One training run per lambda in the grid.
    SweepLambda(SweepArgs),
    /// The four loss-component combinations under a shared seed.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Write the main table here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

fn some_vec(v: &[String]) -> Option<Vec<String>> {
    (!v.is_empty()).then(|| v.to_vec())
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    /// mbert-like or xlmr-like.
    #[arg(long)]
    pub preset: Option<String>,
    /// pos or dep.
    #[arg(long)]
    pub task: Option<String>,
    /// baseline, alignment or vacai.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "BOOL")]
    pub use_inv_loss: Option<bool>,
    #[arg(long, value_name = "BOOL")]
    pub use_spc_loss: Option<bool>,
    /// Encoder and discriminator hidden width; 0 means the input width.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Arc projection width; 0 means half the input width.
    #[arg(long)]
    pub arc_dim: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Training corpus as ID=PREFIX; repeatable.
    #[arg(long = "source", value_name = "ID=PREFIX")]
    pub sources: Vec<String>,
    /// Dev corpus for checkpoint selection; repeatable.
    #[arg(long = "dev", value_name = "ID=PREFIX")]
    pub dev: Vec<String>,
}

impl TrainFlags {
    fn train_section(&self) -> TrainSection {
        TrainSection {
            preset: self.preset.clone(),
            task: self.task.clone(),
            mode: self.mode.clone(),
            lambda: self.lambda,
            lr: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            max_steps: self.max_steps,
            seed: self.seed,
            use_inv_loss: self.use_inv_loss,
            use_spc_loss: self.use_spc_loss,
            lambda_grid: None,
            hidden: self.hidden,
            arc_dim: self.arc_dim,
            eval_every: self.eval_every,
        }
    }

    fn data_section(&self) -> DataSection {
        DataSection {
            sources: some_vec(&self.sources),
            dev: some_vec(&self.dev),
            ..DataSection::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: Common,
    /// Target variety as ID=PREFIX.
    #[arg(long, value_name = "ID=PREFIX")]
    pub target: Option<String>,
    /// Candidate source variety; repeatable.
    #[arg(long = "candidate", value_name = "ID=PREFIX")]
    pub candidates: Vec<String>,
    /// Replace a coinciding overlap pick with the overlap runner-up.
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    pub force_distinct: Option<bool>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Checkpoint file to write.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Per-step loss trace TSV.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Test corpus as ID=PREFIX; repeatable.
    #[arg(long = "test", value_name = "ID=PREFIX")]
    pub test: Vec<String>,
    /// Per-sentence TSV.
    #[arg(long, value_name = "FILE")]
    pub per_sentence: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CkaArgs {
    #[command(flatten)]
    pub common: Common,
    /// Corpus as ID=PREFIX; repeatable, at least two.
    #[arg(long = "corpus", value_name = "ID=PREFIX")]
    pub corpora: Vec<String>,
    /// Analyze the joint features of this checkpoint instead of raw [CLS] vectors.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for per-variety feature CSV dumps.
    #[arg(long, value_name = "DIR")]
    pub features_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// triple or pair.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Shared vocabulary fraction (pair only).
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Centroid distance (pair only).
    #[arg(long)]
    pub spread: Option<f64>,
    /// Training sentences per variety.
    #[arg(long)]
    pub sentences: Option<usize>,
    #[arg(long)]
    pub dev_sentences: Option<usize>,
    #[arg(long)]
    pub test_sentences: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Seeded fixtures per check.
    #[arg(long)]
    pub fixtures: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Comma-separated lambda values.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    /// Evaluation corpus; repeatable.
    #[arg(long = "test", value_name = "ID=PREFIX")]
    pub test: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Evaluation corpus; repeatable.
    #[arg(long = "test", value_name = "ID=PREFIX")]
    pub test: Vec<String>,
}

fn output(common: &Common) -> OutputSection {
    OutputSection {
        table: common.output.clone(),
        ..OutputSection::default()
    }
}

impl Command {
    pub fn config_path(&self) -> Option<&PathBuf> {
        match self {
            Command::SelectSources(a) => a.common.config.as_ref(),
            Command::Train(a) => a.common.config.as_ref(),
            Command::Evaluate(a) => a.common.config.as_ref(),
            Command::AnalyzeCka(a) => a.common.config.as_ref(),
            Command::Synth(a) => a.common.config.as_ref(),
            Command::Gradcheck(a) => a.common.config.as_ref(),
            Command::SweepLambda(a) => a.common.config.as_ref(),
            Command::Ablate(a) => a.common.config.as_ref(),
        }
    }

    /// The flags given on the command line, as a sparse configuration.
    pub fn flag_config(&self) -> RunConfig {
        match self {
            Command::SelectSources(a) => RunConfig {
                data: Some(DataSection {
                    target: a.target.clone(),
                    candidates: some_vec(&a.candidates),
                    ..DataSection::default()
                }),
                output: Some(output(&a.common)),
                select: Some(SelectSection {
                    force_distinct: a.force_distinct,
                }),
                ..RunConfig::default()
            },
            Command::Train(a) => RunConfig {
                train: Some(a.flags.train_section()),
                data: Some(a.flags.data_section()),
                output: Some(OutputSection {
                    checkpoint: a.checkpoint.clone(),
                    trace: a.trace.clone(),
                    ..output(&a.common)
                }),
                ..RunConfig::default()
            },
            Command::Evaluate(a) => RunConfig {
                data: Some(DataSection {
                    checkpoint: a.checkpoint.clone(),
                    test: some_vec(&a.test),
                    ..DataSection::default()
                }),
                output: Some(OutputSection {
                    per_sentence: a.per_sentence.clone(),
                    ..output(&a.common)
                }),
                ..RunConfig::default()
            },
            Command::AnalyzeCka(a) => RunConfig {
                data: Some(DataSection {
                    corpora: some_vec(&a.corpora),
                    checkpoint: a.checkpoint.clone(),
                    ..DataSection::default()
                }),
                output: Some(OutputSection {
                    features_dir: a.features_dir.clone(),
                    ..output(&a.common)
                }),
                cka: Some(CkaSection {
                    sample_size: a.sample_size,
                    seed: a.seed,
                }),
                ..RunConfig::default()
            },
            Command::Synth(a) => RunConfig {
                synth: Some(SynthSection {
                    kind: a.kind.clone(),
                    seed: a.seed,
                    overlap: a.overlap,
                    spread: a.spread,
                    sentences: a.sentences,
                    dev_sentences: a.dev_sentences,
                    test_sentences: a.test_sentences,
                }),
                output: Some(OutputSection {
                    dir: a.out_dir.clone(),
                    ..output(&a.common)
                }),
                ..RunConfig::default()
            },
            Command::Gradcheck(a) => RunConfig {
                gradcheck: Some(GradcheckSection {
                    fixtures: a.fixtures,
                    seed: a.seed,
                }),
                output: Some(output(&a.common)),
                ..RunConfig::default()
            },
            Command::SweepLambda(a) => RunConfig {
                train: Some(TrainSection {
                    lambda_grid: (!a.grid.is_empty()).then(|| a.grid.clone()),
                    ..a.flags.train_section()
                }),
                data: Some(DataSection {
                    test: some_vec(&a.test),
                    ..a.flags.data_section()
                }),
                output: Some(output(&a.common)),
                ..RunConfig::default()
            },
            Command::Ablate(a) => RunConfig {
                train: Some(a.flags.train_section()),
                data: Some(DataSection {
                    test: some_vec(&a.test),
                    ..a.flags.data_section()
                }),
                output: Some(output(&a.common)),
                ..RunConfig::default()
            },
        }
    }
}
