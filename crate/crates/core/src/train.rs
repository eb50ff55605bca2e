//! Training loop, evaluation, λ sweep and loss-component ablation.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{check_unique_ids, VarietyCorpus};
use crate::error::{Error, Result};
use crate::model::{Ablation, Batch, DualEncoderModel, Mode, ModelSpec, TaskTargets};
use crate::nn::{Adam, Matrix, Parameters};
use crate::tasks::{token_f1, AttachmentCounts, LabelSpace, TaskKind};

/// Named hyperparameter sets for the two backbone families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// lr 2e-4, batch 64.
    MbertLike,
    /// lr 5e-5, batch 64.
    XlmrLike,
}

impl Preset {
    pub fn lr(self) -> f64 {
        match self {
            Preset::MbertLike => 2e-4,
            Preset::XlmrLike => 5e-5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::MbertLike => "mbert-like",
            Preset::XlmrLike => "xlmr-like",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mbert-like" => Ok(Preset::MbertLike),
            "xlmr-like" => Ok(Preset::XlmrLike),
            other => Err(Error::Config(alloc::format!("unknown preset '{other}'"))),
        }
    }
}

pub const DEFAULT_LAMBDA_GRID: [f64; 3] = [0.1, 0.5, 1.0];

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub mode: Mode,
    pub ablation: Ablation,
    pub lambda_grid: Vec<f64>,
    pub task: TaskKind,
    /// Hidden width of every two-layer component; `None` means the input width.
    pub hidden: Option<usize>,
    /// Arc projection width; `None` means half the input width.
    pub arc_dim: Option<usize>,
    /// Dev evaluation period in steps. The final step is always evaluated.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::preset(Preset::MbertLike)
    }
}

impl TrainConfig {
    pub fn preset(preset: Preset) -> Self {
        TrainConfig {
            lambda: 1.0,
            lr: preset.lr(),
            batch_size: 64,
            max_epochs: 10,
            max_steps: 1000,
            seed: 0,
            mode: Mode::Vacai,
            ablation: Ablation::FULL,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            task: TaskKind::Dep,
            hidden: None,
            arc_dim: None,
            eval_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.eval_every == 0 {
            return Err(Error::Config(String::from(
                "batch_size, max_epochs and eval_every must be positive",
            )));
        }
        if !(self.lr > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::Config(String::from(
                "lr must be positive and lambda non-negative",
            )));
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::Config(String::from("lambda grid values must be non-negative")));
        }
        Ok(())
    }

    /// Step budget for a training pool of `pool` sentences.
    pub fn total_steps(&self, pool: usize) -> usize {
        let per_epoch = pool.div_ceil(self.batch_size);
        (self.max_epochs * per_epoch).min(self.max_steps)
    }
}

/// One training step's losses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub l_inv: f64,
    pub l_spc: f64,
    pub l_task: f64,
    pub l_total: f64,
    pub inv_accuracy: f64,
    pub spc_accuracy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DevPoint {
    pub step: usize,
    pub metric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    /// Checkpoint with the highest dev metric (earliest on ties), or the
    /// final weights when no dev data was given.
    pub model: DualEncoderModel,
    pub trace: Vec<TraceRow>,
    pub dev_trace: Vec<DevPoint>,
    pub best_step: usize,
    pub best_metric: Option<f64>,
}

/// Task scores of a model on one corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub task: TaskKind,
    pub sentences: usize,
    pub words: usize,
    /// UAS for DEP, F1 for POS.
    pub primary: f64,
    /// LAS for DEP.
    pub las: Option<f64>,
    /// Per-sentence `(words, correct heads or tags, correct labeled)`.
    pub per_sentence: Vec<(usize, usize, usize)>,
}

/// Label inventory of the task across the given corpora.
pub fn label_space(task: TaskKind, corpora: &[&VarietyCorpus]) -> Result<LabelSpace> {
    let mut labels = Vec::new();
    for c in corpora {
        for (i, s) in c.sentences.iter().enumerate() {
            let col = match task {
                TaskKind::Pos => s.pos_tags.as_ref(),
                TaskKind::Dep => s.deprels.as_ref(),
            };
            let col = col.ok_or_else(|| Error::MissingLabels {
                variety: c.variety_id.clone(),
                sentence: i,
            })?;
            labels.extend(col.iter().cloned());
        }
    }
    Ok(LabelSpace::from_labels(labels))
}

fn check_trainable(corpus: &VarietyCorpus, task: TaskKind, dim: usize) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    for (i, s) in corpus.sentences.iter().enumerate() {
        let e = corpus.embedding(i)?;
        if e.dim() != dim {
            return Err(Error::Shape {
                what: "embedding dimension across corpora",
                expected: dim,
                found: e.dim(),
            });
        }
        let labeled = match task {
            TaskKind::Pos => s.pos_tags.is_some(),
            TaskKind::Dep => s.heads.is_some() && s.deprels.is_some(),
        };
        if !labeled || s.is_empty() {
            return Err(Error::MissingLabels {
                variety: corpus.variety_id.clone(),
                sentence: i,
            });
        }
    }
    Ok(())
}

/// Assembles a batch from `(corpus, sentence)` pairs; the corpus index is
/// the variety class.
pub fn make_batch(
    corpora: &[&VarietyCorpus],
    items: &[(usize, usize)],
    task: TaskKind,
    labels: &LabelSpace,
) -> Result<Batch> {
    let first = corpora[items[0].0].embedding(items[0].1)?;
    let dim = first.dim();
    let mut token_data = Vec::new();
    let mut cls_data = Vec::with_capacity(items.len() * dim);
    let mut spans = Vec::with_capacity(items.len());
    let mut y_var = Vec::with_capacity(items.len());
    let mut tags = Vec::new();
    let mut heads = Vec::new();
    let mut rels = Vec::new();
    let mut row = 0;
    for &(c, s) in items {
        let corpus = corpora[c];
        let sent = &corpus.sentences[s];
        let e = corpus.embedding(s)?;
        token_data.extend_from_slice(e.token_vectors().data());
        cls_data.extend_from_slice(e.cls_final());
        spans.push((row, sent.len()));
        row += sent.len();
        y_var.push(c);
        let missing = || Error::MissingLabels {
            variety: corpus.variety_id.clone(),
            sentence: s,
        };
        let lookup = |l: &String| {
            labels.get(l).ok_or_else(|| {
                Error::Config(alloc::format!("label '{l}' missing from the label space"))
            })
        };
        match task {
            TaskKind::Pos => {
                for t in sent.pos_tags.as_ref().ok_or_else(missing)? {
                    tags.push(lookup(t)?);
                }
            }
            TaskKind::Dep => {
                heads.extend_from_slice(sent.heads.as_ref().ok_or_else(missing)?);
                for r in sent.deprels.as_ref().ok_or_else(missing)? {
                    rels.push(lookup(r)?);
                }
            }
        }
    }
    let y_task = match task {
        TaskKind::Pos => TaskTargets::Pos(tags),
        TaskKind::Dep => TaskTargets::Dep { heads, rels },
    };
    Ok(Batch {
        tokens: Matrix::from_vec(row, dim, token_data)?,
        spans,
        cls: Matrix::from_vec(items.len(), dim, cls_data)?,
        y_var,
        y_task,
    })
}

/// Task scores of `model` on `corpus`, micro-averaged over words.
pub fn evaluate(model: &DualEncoderModel, corpus: &VarietyCorpus) -> Result<Evaluation> {
    let task = model.head_kind();
    let labels = &model.spec.labels;
    let mut counts = AttachmentCounts::default();
    let mut per_sentence = Vec::with_capacity(corpus.len());
    let mut pred_tags = Vec::new();
    let mut gold_tags = Vec::new();
    for (i, s) in corpus.sentences.iter().enumerate() {
        let e = corpus.embedding(i)?;
        let (pred, pred_rels) = model.predict(e.token_vectors())?;
        let missing = || Error::MissingLabels {
            variety: corpus.variety_id.clone(),
            sentence: i,
        };
        match task {
            TaskKind::Pos => {
                let gold: Vec<usize> = s
                    .pos_tags
                    .as_ref()
                    .ok_or_else(missing)?
                    .iter()
                    .map(|t| labels.get(t).unwrap_or(usize::MAX))
                    .collect();
                let hits = pred.iter().zip(&gold).filter(|(p, g)| p == g).count();
                per_sentence.push((s.len(), hits, hits));
                pred_tags.extend(pred);
                gold_tags.extend(gold);
            }
            TaskKind::Dep => {
                let gold_heads = s.heads.as_ref().ok_or_else(missing)?;
                let gold_rels: Vec<usize> = s
                    .deprels
                    .as_ref()
                    .ok_or_else(missing)?
                    .iter()
                    .map(|r| labels.get(r).unwrap_or(usize::MAX))
                    .collect();
                let mut one = AttachmentCounts::default();
                one.add(&pred, &pred_rels, gold_heads, &gold_rels)?;
                per_sentence.push((one.words, one.heads_correct, one.labeled_correct));
                counts.merge(&one);
            }
        }
    }
    let (primary, las) = match task {
        TaskKind::Pos => (token_f1(&pred_tags, &gold_tags)?, None),
        TaskKind::Dep => (counts.uas()?, Some(counts.las()?)),
    };
    Ok(Evaluation {
        task,
        sentences: corpus.len(),
        words: corpus.word_count(),
        primary,
        las,
        per_sentence,
    })
}

/// Primary metric pooled over several corpora (micro over all words).
pub fn pooled_metric(model: &DualEncoderModel, corpora: &[VarietyCorpus]) -> Result<f64> {
    let mut words = 0usize;
    let mut hits = 0usize;
    for c in corpora {
        let e = evaluate(model, c)?;
        for (w, h, _) in e.per_sentence {
            words += w;
            hits += h;
        }
    }
    if words == 0 {
        return Err(Error::Empty("dev set"));
    }
    Ok(hits as f64 / words as f64)
}

/// Held-out accuracy of the two discriminators on `corpora`, where the i-th
/// corpus carries variety class i. Returns `(invariant, specific)`.
pub fn discriminator_accuracy(model: &DualEncoderModel, corpora: &[&VarietyCorpus]) -> Result<(f64, f64)> {
    let mut total = 0usize;
    let (mut inv_hits, mut spc_hits) = (0usize, 0usize);
    for (class, c) in corpora.iter().enumerate() {
        let idx: Vec<usize> = (0..c.len()).collect();
        let cls = c.cls_final_rows(&idx)?;
        let (inv, spc) = model.predict_varieties(&cls)?;
        inv_hits += inv.iter().filter(|&&p| p == class).count();
        spc_hits += spc.iter().filter(|&&p| p == class).count();
        total += c.len();
    }
    if total == 0 {
        return Err(Error::Empty("held-out set"));
    }
    Ok((inv_hits as f64 / total as f64, spc_hits as f64 / total as f64))
}

impl DualEncoderModel {
    pub fn head_kind(&self) -> TaskKind {
        self.head.kind()
    }
}

/// Builds the initial model for `sources` without training it.
pub fn init_model(sources: &[VarietyCorpus], config: &TrainConfig) -> Result<DualEncoderModel> {
    config.validate()?;
    if sources.is_empty() {
        return Err(Error::Empty("source corpora"));
    }
    check_unique_ids(sources)?;
    let dim = sources[0]
        .embedding_dim()?
        .ok_or_else(|| Error::MissingEmbedding {
            variety: sources[0].variety_id.clone(),
            sentence: 0,
        })?;
    for c in sources {
        check_trainable(c, config.task, dim)?;
    }
    let refs: Vec<&VarietyCorpus> = sources.iter().collect();
    let spec = ModelSpec {
        dim,
        hidden: config.hidden.unwrap_or(dim),
        arc_dim: config.arc_dim.unwrap_or(dim / 2),
        task: config.task,
        varieties: sources.iter().map(|c| c.variety_id.clone()).collect(),
        labels: label_space(config.task, &refs)?,
    };
    DualEncoderModel::new(spec, config.mode, config.ablation, config.lambda, config.seed)
}

/// Trains on the pooled `sources` with seeded shuffling, keeping the
/// checkpoint with the best metric on `dev`.
pub fn train(sources: &[VarietyCorpus], dev: &[VarietyCorpus], config: &TrainConfig) -> Result<TrainOutcome> {
    let mut model = init_model(sources, config)?;
    let refs: Vec<&VarietyCorpus> = sources.iter().collect();
    let mut pool: Vec<(usize, usize)> = Vec::new();
    for (c, corpus) in sources.iter().enumerate() {
        pool.extend((0..corpus.len()).map(|s| (c, s)));
    }
    let total_steps = config.total_steps(pool.len());
    let adam = Adam::new(config.lr);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let mut trace = Vec::with_capacity(total_steps);
    let mut dev_trace = Vec::new();
    let mut best: Option<(f64, usize, DualEncoderModel)> = None;
    let mut step = 0;
    'epochs: while step < total_steps {
        pool.shuffle(&mut shuffle_rng);
        for chunk in pool.chunks(config.batch_size) {
            if step == total_steps {
                break 'epochs;
            }
            step += 1;
            let batch = make_batch(&refs, chunk, config.task, &model.spec.labels)?;
            model.zero_grad();
            let losses = model.loss_total(&batch, true)?;
            let mut update = Ok(());
            model.visit_params("", &mut |_, p| {
                if update.is_ok() {
                    update = p.adam_update(&adam, step as u64);
                }
            });
            update?;
            trace.push(TraceRow {
                step,
                l_inv: losses.inv,
                l_spc: losses.spc,
                l_task: losses.task,
                l_total: losses.total,
                inv_accuracy: losses.inv_accuracy,
                spc_accuracy: losses.spc_accuracy,
            });
            if !dev.is_empty() && (step % config.eval_every == 0 || step == total_steps) {
                let metric = pooled_metric(&model, dev)?;
                dev_trace.push(DevPoint { step, metric });
                if best.as_ref().is_none_or(|(m, _, _)| metric > *m) {
                    best = Some((metric, step, model.clone()));
                }
            }
        }
    }
    model.zero_grad();
    Ok(match best {
        Some((metric, best_step, mut m)) => {
            m.zero_grad();
            TrainOutcome {
                model: m,
                trace,
                dev_trace,
                best_step,
                best_metric: Some(metric),
            }
        }
        None => TrainOutcome {
            model,
            trace,
            dev_trace,
            best_step: step,
            best_metric: None,
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub best_step: usize,
    /// Best dev metric; `None` without dev data.
    pub dev_metric: Option<f64>,
    /// Primary metric of the selected checkpoint on each evaluation corpus.
    pub eval: Vec<(String, f64)>,
}

fn eval_columns(model: &DualEncoderModel, eval: &[VarietyCorpus]) -> Result<Vec<(String, f64)>> {
    eval.iter()
        .map(|c| Ok((c.variety_id.clone(), evaluate(model, c)?.primary)))
        .collect()
}

/// One full training run per λ in `config.lambda_grid`, all with the same seed.
pub fn lambda_sweep(
    sources: &[VarietyCorpus],
    dev: &[VarietyCorpus],
    eval: &[VarietyCorpus],
    config: &TrainConfig,
) -> Result<Vec<SweepRow>> {
    if config.lambda_grid.is_empty() {
        return Err(Error::Empty("lambda grid"));
    }
    let mut rows = Vec::with_capacity(config.lambda_grid.len());
    for &lambda in &config.lambda_grid {
        let run = TrainConfig {
            lambda,
            ..config.clone()
        };
        let out = train(sources, dev, &run)?;
        rows.push(SweepRow {
            lambda,
            best_step: out.best_step,
            dev_metric: out.best_metric,
            eval: eval_columns(&out.model, eval)?,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub label: &'static str,
    pub ablation: Ablation,
    pub best_step: usize,
    pub dev_metric: Option<f64>,
    pub eval: Vec<(String, f64)>,
}

impl AblationRow {
    pub fn mean(&self) -> f64 {
        if self.eval.is_empty() {
            return 0.0;
        }
        self.eval.iter().map(|e| e.1).sum::<f64>() / self.eval.len() as f64
    }
}

/// The four loss-component combinations, in reporting order.
pub const ABLATION_ROWS: [(&str, Ablation); 4] = [
    (
        "w/o both",
        Ablation {
            use_inv_loss: false,
            use_spc_loss: false,
        },
    ),
    (
        "w/o spc",
        Ablation {
            use_inv_loss: true,
            use_spc_loss: false,
        },
    ),
    (
        "w/o inv",
        Ablation {
            use_inv_loss: false,
            use_spc_loss: true,
        },
    ),
    ("full", Ablation::FULL),
];

/// Trains the four ablation variants of the full model with a shared seed.
pub fn ablation_suite(
    sources: &[VarietyCorpus],
    dev: &[VarietyCorpus],
    eval: &[VarietyCorpus],
    config: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(ABLATION_ROWS.len());
    for (label, ablation) in ABLATION_ROWS {
        let run = TrainConfig {
            mode: Mode::Vacai,
            ablation,
            ..config.clone()
        };
        let out = train(sources, dev, &run)?;
        rows.push(AblationRow {
            label,
            ablation,
            best_step: out.best_step,
            dev_metric: out.best_metric,
            eval: eval_columns(&out.model, eval)?,
        });
    }
    Ok(rows)
}

/// Mean of per-row values, used by summary tables.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::synth::{generate, SynthConfig, SynthData};

    fn data(seed: u64) -> SynthData {
        generate(&SynthConfig::pair(0.3, 1.0, seed)).unwrap()
    }

    fn quick(mode: Mode, seed: u64) -> TrainConfig {
        TrainConfig {
            mode,
            seed,
            max_steps: 12,
            batch_size: 16,
            eval_every: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn step_budget() {
        let c = TrainConfig::default();
        assert_eq!(c.total_steps(6400), 1000);
        assert_eq!(c.total_steps(640), 100);
        assert_eq!(c.total_steps(65), 20);
        assert_eq!(c.total_steps(0), 0);
    }

    #[test]
    fn presets() {
        assert_eq!(TrainConfig::preset(Preset::MbertLike).lr, 2e-4);
        assert_eq!(TrainConfig::preset(Preset::XlmrLike).lr, 5e-5);
        let d = TrainConfig::default();
        assert_eq!((d.batch_size, d.max_epochs, d.max_steps), (64, 10, 1000));
        assert_eq!(d.lambda_grid, DEFAULT_LAMBDA_GRID.to_vec());
    }

    #[test]
    fn zero_steps_returns_the_initial_model() {
        let d = data(1);
        let c = TrainConfig { max_steps: 0, ..quick(Mode::Vacai, 4) };
        let src = d.corpora(Split::Train);
        let out = train(&src, &d.corpora(Split::Dev), &c).unwrap();
        assert!(out.trace.is_empty());
        assert!(out.dev_trace.is_empty());
        assert_eq!(out.model, init_model(&src, &c).unwrap());
    }

    #[test]
    fn replay_is_identical() {
        let d = data(2);
        let c = quick(Mode::Vacai, 7);
        let a = train(&d.corpora(Split::Train), &d.corpora(Split::Dev), &c).unwrap();
        let b = train(&d.corpora(Split::Train), &d.corpora(Split::Dev), &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.len(), 12);
        assert_eq!(a.dev_trace.iter().map(|p| p.step).collect::<Vec<_>>(), [4, 8, 12]);
    }

    #[test]
    fn best_checkpoint_is_the_earliest_argmax() {
        let d = data(3);
        let out = train(&d.corpora(Split::Train), &d.corpora(Split::Dev), &quick(Mode::Baseline, 1)).unwrap();
        let best = out.dev_trace.iter().map(|p| p.metric).fold(f64::NEG_INFINITY, f64::max);
        let first = out.dev_trace.iter().find(|p| p.metric == best).unwrap();
        assert_eq!(out.best_step, first.step);
        assert_eq!(out.best_metric, Some(best));
        assert_eq!(pooled_metric(&out.model, &d.corpora(Split::Dev)).unwrap(), best);
    }

    #[test]
    fn trace_reports_only_active_terms() {
        let d = data(4);
        let src = d.corpora(Split::Train);
        let base = train(&src, &[], &quick(Mode::Baseline, 0)).unwrap();
        assert!(base.trace.iter().all(|t| t.l_inv == 0.0 && t.l_spc == 0.0 && t.l_total == t.l_task));
        let align = train(&src, &[], &quick(Mode::AlignmentOnly, 0)).unwrap();
        assert!(align.trace.iter().all(|t| t.l_inv > 0.0 && t.l_spc == 0.0));
        assert_eq!(align.best_metric, None);
    }

    #[test]
    fn sweep_rows_follow_the_grid() {
        let d = data(5);
        let (src, dev, test) = (d.corpora(Split::Train), d.corpora(Split::Dev), d.corpora(Split::Test));
        let c = quick(Mode::Vacai, 2);
        let rows = lambda_sweep(&src, &dev, &test, &c).unwrap();
        assert_eq!(rows.iter().map(|r| r.lambda).collect::<Vec<_>>(), DEFAULT_LAMBDA_GRID);
        assert_eq!(rows, lambda_sweep(&src, &dev, &test, &c).unwrap());

        let one = TrainConfig { lambda_grid: alloc::vec![0.5], ..c.clone() };
        let row = &lambda_sweep(&src, &dev, &test, &one).unwrap()[0];
        let direct = train(&src, &dev, &TrainConfig { lambda: 0.5, ..c.clone() }).unwrap();
        assert_eq!(row.dev_metric, direct.best_metric);
        assert_eq!(row.eval[0].1, evaluate(&direct.model, &test[0]).unwrap().primary);

        let empty = TrainConfig { lambda_grid: Vec::new(), ..c };
        assert!(lambda_sweep(&src, &dev, &test, &empty).is_err());
    }

    #[test]
    fn ablation_rows_and_baseline_equivalence() {
        let d = data(6);
        let (src, dev, test) = (d.corpora(Split::Train), d.corpora(Split::Dev), d.corpora(Split::Test));
        let c = quick(Mode::Vacai, 3);
        let rows = ablation_suite(&src, &dev, &test, &c).unwrap();
        let labels: Vec<&str> = rows.iter().map(|r| r.label).collect();
        assert_eq!(labels, ["w/o both", "w/o spc", "w/o inv", "full"]);
        let base = train(&src, &dev, &TrainConfig { mode: Mode::Baseline, ..c }).unwrap();
        assert_eq!(rows[0].dev_metric, base.best_metric);
        assert_eq!(rows[0].best_step, base.best_step);
        let evals: Vec<f64> = test.iter().map(|t| evaluate(&base.model, t).unwrap().primary).collect();
        assert_eq!(rows[0].eval.iter().map(|e| e.1).collect::<Vec<_>>(), evals);
    }

    #[test]
    fn rejects_untrainable_input() {
        let d = data(7);
        let c = quick(Mode::Vacai, 0);
        assert!(train(&[], &[], &c).is_err());
        let mut src = d.corpora(Split::Train);
        src[1].variety_id = src[0].variety_id.clone();
        assert!(train(&src, &[], &c).is_err());
        let mut src = d.corpora(Split::Train);
        src[0].sentences[3].embedding = None;
        assert!(train(&src, &[], &c).is_err());
        let mut src = d.corpora(Split::Train);
        src[0].sentences[0].heads = None;
        assert!(train(&src, &[], &c).is_err());
        let bad = TrainConfig { batch_size: 0, ..c };
        assert!(train(&d.corpora(Split::Train), &[], &bad).is_err());
    }

    #[test]
    fn pos_training_reports_token_f1() {
        let d = data(8);
        let c = TrainConfig { task: TaskKind::Pos, ..quick(Mode::Vacai, 0) };
        let out = train(&d.corpora(Split::Train), &d.corpora(Split::Dev), &c).unwrap();
        let e = evaluate(&out.model, &d.varieties[0].test).unwrap();
        assert_eq!(e.task, TaskKind::Pos);
        assert!(e.las.is_none());
        assert!((0.0..=1.0).contains(&e.primary));
    }
}
