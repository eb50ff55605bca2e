//! Run configuration: a TOML document with one table per concern.
//!
//! Every field is optional in the file. A run merges flags over the file
//! and fills the rest from the preset, then echoes the merged document so
//! it can be replayed with `--config`.

use std::path::{Path, PathBuf};

use lingen_core::model::{Ablation, Mode};
use lingen_core::tasks::TaskKind;
use lingen_core::train::{Preset, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cka: Option<CkaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradcheck: Option<GradcheckSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<SelectSection>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_inv_loss: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_spc_loss: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    /// 0 means the input width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    /// 0 means half the input width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arc_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<usize>,
}

/// Corpus references are `ID=PREFIX`, naming `PREFIX.conllu`,
/// `PREFIX.vemb` and an optional `PREFIX.tokens`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sources: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpora: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Main table; standard output when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_sentence: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    /// "triple" or "pair".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Pair only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<f64>,
    /// Pair only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sentences: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_sentences: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_sentences: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CkaSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub force_distinct: Option<bool>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, toml::de::Error> {
    toml::from_str(text)
}

pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text).map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.message())))
}

/// Fills every unset field of `self` from `base`.
pub trait Overlay {
    fn overlay(self, base: Self) -> Self;
}

macro_rules! overlay_fields {
    ($ty:ident { $($f:ident),* $(,)? }) => {
        impl Overlay for $ty {
            fn overlay(self, base: Self) -> Self {
                $ty { $($f: self.$f.or(base.$f)),* }
            }
        }
    };
}

overlay_fields!(TrainSection {
    preset, task, mode, lambda, lr, batch_size, max_epochs, max_steps, seed,
    use_inv_loss, use_spc_loss, lambda_grid, hidden, arc_dim, eval_every,
});
overlay_fields!(DataSection { sources, dev, test, target, candidates, corpora, checkpoint });
overlay_fields!(OutputSection { table, trace, checkpoint, per_sentence, features_dir, dir });
overlay_fields!(SynthSection { kind, seed, overlap, spread, sentences, dev_sentences, test_sentences });
overlay_fields!(CkaSection { sample_size, seed });
overlay_fields!(GradcheckSection { fixtures, seed });
overlay_fields!(SelectSection { force_distinct });

impl<T: Overlay> Overlay for Option<T> {
    fn overlay(self, base: Self) -> Self {
        match (self, base) {
            (Some(a), Some(b)) => Some(a.overlay(b)),
            (a, b) => a.or(b),
        }
    }
}

impl Overlay for RunConfig {
    fn overlay(self, base: Self) -> Self {
        RunConfig {
            train: self.train.overlay(base.train),
            data: self.data.overlay(base.data),
            output: self.output.overlay(base.output),
            synth: self.synth.overlay(base.synth),
            cka: self.cka.overlay(base.cka),
            gradcheck: self.gradcheck.overlay(base.gradcheck),
            select: self.select.overlay(base.select),
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

impl TrainSection {
    /// Complete section: every field set, preset defaults underneath.
    pub fn resolved(self) -> CliResult<TrainSection> {
        let preset: Preset = self.preset.as_deref().unwrap_or("mbert-like").parse().map_err(usage)?;
        let d = TrainConfig::preset(preset);
        let full = TrainSection {
            preset: Some(preset.to_string()),
            task: Some(d.task.to_string()),
            mode: Some(d.mode.to_string()),
            lambda: Some(d.lambda),
            lr: Some(d.lr),
            batch_size: Some(d.batch_size),
            max_epochs: Some(d.max_epochs),
            max_steps: Some(d.max_steps),
            seed: Some(d.seed),
            use_inv_loss: Some(d.ablation.use_inv_loss),
            use_spc_loss: Some(d.ablation.use_spc_loss),
            lambda_grid: Some(d.lambda_grid),
            hidden: Some(0),
            arc_dim: Some(0),
            eval_every: Some(d.eval_every),
        };
        let out = self.overlay(full);
        let mode: Mode = out.mode.as_deref().unwrap_or_default().parse().map_err(usage)?;
        let task: TaskKind = out.task.as_deref().unwrap_or_default().parse().map_err(usage)?;
        Ok(TrainSection {
            mode: Some(mode.to_string()),
            task: Some(task.to_string()),
            ..out
        })
    }

    /// Core training configuration of a resolved section.
    pub fn to_train_config(&self) -> CliResult<TrainConfig> {
        let r = self.clone().resolved()?;
        let config = TrainConfig {
            lambda: r.lambda.unwrap_or_default(),
            lr: r.lr.unwrap_or_default(),
            batch_size: r.batch_size.unwrap_or_default(),
            max_epochs: r.max_epochs.unwrap_or_default(),
            max_steps: r.max_steps.unwrap_or_default(),
            seed: r.seed.unwrap_or_default(),
            mode: r.mode.as_deref().unwrap_or_default().parse().map_err(usage)?,
            ablation: Ablation {
                use_inv_loss: r.use_inv_loss.unwrap_or(true),
                use_spc_loss: r.use_spc_loss.unwrap_or(true),
            },
            lambda_grid: r.lambda_grid.unwrap_or_default(),
            task: r.task.as_deref().unwrap_or_default().parse().map_err(usage)?,
            hidden: r.hidden.filter(|&h| h > 0),
            arc_dim: r.arc_dim.filter(|&a| a > 0),
            eval_every: r.eval_every.unwrap_or_default(),
        };
        config.validate().map_err(usage)?;
        Ok(config)
    }
}

/// TOML text of a resolved configuration, framed by marker comments.
pub fn echo(config: &RunConfig) -> String {
    let body = toml::to_string(config).expect("run configuration serializes");
    format!("# resolved config\n{body}# end resolved config\n")
}

/// Extracts the TOML document from an echoed block, e.g. captured stderr.
pub fn extract_echo(text: &str) -> Option<&str> {
    let start = text.find("# resolved config\n")? + "# resolved config\n".len();
    let len = text[start..].find("# end resolved config")?;
    Some(&text[start..start + len])
}
