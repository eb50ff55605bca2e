//! Dual-encoder model: an adversarially trained variety-invariant branch and
//! a cooperatively trained variety-specific branch, concatenated into the
//! joint feature consumed by the task head.
//!
//! ```text
//!   x ──► f_inv ──► h_inv ──┬──► GRL(λ) ──► D_inv ──► L_inv
//!   │                       │
//!   └──► f_spc ──► h_spc ──┬┼──────────────► D_spc ──► L_spc
//!                          ││
//!                h = h_inv ‖ h_spc ──► task head ──► L_task
//! ```
//!
//! The discriminators see only the sentence-level `[CLS]` rows. The encoders
//! are also applied to every word-aligned token vector, and the task head
//! consumes the per-word joint features.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_dim, Error, Result};
use crate::nn::layers::join;
use crate::nn::loss::predict_rows;
use crate::nn::{concat_cols, softmax_xent, split_cols, GrlGate, Matrix, Mlp, Param, Parameters};
use crate::tasks::{DepHead, LabelSpace, PosHead, TaskKind};

/// Which of the three training regimes is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Task loss only over `h_inv ‖ h_spc`.
    Baseline,
    /// Adversarial invariant branch only; the head reads `h_inv ‖ h_inv`.
    AlignmentOnly,
    /// Both branches with their discriminator losses.
    Vacai,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::AlignmentOnly => "alignment",
            Mode::Vacai => "vacai",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" | "finetune" => Ok(Mode::Baseline),
            "alignment" | "alignment_only" | "alignment-only" => Ok(Mode::AlignmentOnly),
            "vacai" | "vacai-bowl" => Ok(Mode::Vacai),
            other => Err(Error::Config(alloc::format!("unknown mode '{other}'"))),
        }
    }
}

/// Loss-component toggles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ablation {
    pub use_inv_loss: bool,
    pub use_spc_loss: bool,
}

impl Ablation {
    pub const FULL: Ablation = Ablation {
        use_inv_loss: true,
        use_spc_loss: true,
    };
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation::FULL
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TaskHead {
    Pos(PosHead),
    Dep(DepHead),
}

impl TaskHead {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskHead::Pos(_) => TaskKind::Pos,
            TaskHead::Dep(_) => TaskKind::Dep,
        }
    }
}

/// Shape parameters of a [`DualEncoderModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    /// Input feature width `d`; must be even.
    pub dim: usize,
    pub hidden: usize,
    pub arc_dim: usize,
    pub task: TaskKind,
    /// Training varieties; their order defines the discriminator classes.
    pub varieties: Vec<String>,
    /// POS tags or dependency relations.
    pub labels: LabelSpace,
}

/// Per-word task targets of a batch.
#[derive(Clone, Debug, PartialEq)]
pub enum TaskTargets {
    Pos(Vec<usize>),
    Dep { heads: Vec<usize>, rels: Vec<usize> },
}

/// A mini-batch of sentences.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// Token vectors of every word, sentences back to back.
    pub tokens: Matrix,
    /// `(first row, word count)` of each sentence in `tokens`.
    pub spans: Vec<(usize, usize)>,
    /// One `[CLS]` row per sentence.
    pub cls: Matrix,
    pub y_var: Vec<usize>,
    pub y_task: TaskTargets,
}

/// Output of [`DualEncoderModel::encode`].
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub h: Matrix,
    pub h_inv: Matrix,
    pub h_spc: Matrix,
}

/// Individual loss terms. Inactive terms are exactly zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub inv: f64,
    pub spc: f64,
    pub task: f64,
    pub total: f64,
    /// Batch accuracy of the invariant discriminator.
    pub inv_accuracy: f64,
    /// Batch accuracy of the specific discriminator.
    pub spc_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualEncoderModel {
    pub f_inv: Mlp,
    pub f_spc: Mlp,
    pub d_inv: Mlp,
    pub d_spc: Mlp,
    pub grl: GrlGate,
    pub head: TaskHead,
    pub mode: Mode,
    pub ablation: Ablation,
    pub spec: ModelSpec,
}

fn accuracy(logits: &Matrix, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predict_rows(logits)
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    hits as f64 / labels.len() as f64
}

impl DualEncoderModel {
    /// Seeded initialization. Parameters are drawn in a fixed order that does
    /// not depend on `mode` or `ablation`, so equal seeds give equal initial
    /// weights across regimes.
    pub fn new(spec: ModelSpec, mode: Mode, ablation: Ablation, lambda: f64, seed: u64) -> Result<Self> {
        if spec.dim == 0 || spec.dim % 2 != 0 {
            return Err(Error::Config(alloc::format!(
                "feature width must be positive and even, got {}",
                spec.dim
            )));
        }
        if spec.hidden == 0 || spec.arc_dim == 0 {
            return Err(Error::Config(String::from("hidden and arc widths must be positive")));
        }
        if spec.varieties.is_empty() {
            return Err(Error::Empty("training varieties"));
        }
        if spec.labels.is_empty() {
            return Err(Error::Empty("task label space"));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Config(String::from("lambda must be non-negative")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = spec.dim / 2;
        let v = spec.varieties.len();
        let f_inv = Mlp::new(spec.dim, spec.hidden, half, &mut rng);
        let f_spc = Mlp::new(spec.dim, spec.hidden, half, &mut rng);
        let d_inv = Mlp::new(half, spec.hidden, v, &mut rng);
        let d_spc = Mlp::new(half, spec.hidden, v, &mut rng);
        let head = match spec.task {
            TaskKind::Pos => TaskHead::Pos(PosHead::new(spec.dim, spec.labels.len(), &mut rng)),
            TaskKind::Dep => TaskHead::Dep(DepHead::new(
                spec.dim,
                spec.arc_dim,
                spec.labels.len(),
                &mut rng,
            )),
        };
        Ok(DualEncoderModel {
            f_inv,
            f_spc,
            d_inv,
            d_spc,
            grl: GrlGate::new(lambda),
            head,
            mode,
            ablation,
            spec,
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn inv_active(&self) -> bool {
        self.mode != Mode::Baseline && self.ablation.use_inv_loss
    }

    pub fn spc_active(&self) -> bool {
        self.mode == Mode::Vacai && self.ablation.use_spc_loss
    }

    fn joint(&self, h_inv: &Matrix, h_spc: &Matrix) -> Result<Matrix> {
        match self.mode {
            Mode::AlignmentOnly => concat_cols(h_inv, h_inv),
            _ => concat_cols(h_inv, h_spc),
        }
    }

    /// Applies both encoders row-wise and concatenates their outputs.
    pub fn encode(&self, features: &Matrix) -> Result<Encoded> {
        ensure_dim("feature width", self.dim(), features.cols())?;
        let h_inv = self.f_inv.forward(features)?;
        let h_spc = self.f_spc.forward(features)?;
        Ok(Encoded {
            h: self.joint(&h_inv, &h_spc)?,
            h_inv,
            h_spc,
        })
    }

    /// Cross entropy of the invariant discriminator behind the gradient
    /// reversal gate. With `accumulate`, the discriminator receives the plain
    /// gradient and `f_inv` the reversed one. Returns `(loss, accuracy)`.
    pub fn loss_inv(&mut self, cls: &Matrix, y_var: &[usize], accumulate: bool) -> Result<(f64, f64)> {
        ensure_dim("feature width", self.dim(), cls.cols())?;
        let (h_inv, enc_cache) = self.f_inv.forward_cached(cls)?;
        let gated = self.grl.forward(&h_inv);
        let (logits, disc_cache) = self.d_inv.forward_cached(&gated)?;
        let (loss, d_logits) = softmax_xent(&logits, y_var)?;
        if accumulate {
            let d_gated = self.d_inv.backward(&disc_cache, &d_logits)?;
            let d_h = self.grl.backward(&d_gated);
            self.f_inv.backward(&enc_cache, &d_h)?;
        }
        Ok((loss, accuracy(&logits, y_var)))
    }

    /// Cross entropy of the specific discriminator; gradients flow unreversed
    /// into `f_spc`. Returns `(loss, accuracy)`.
    pub fn loss_spc(&mut self, cls: &Matrix, y_var: &[usize], accumulate: bool) -> Result<(f64, f64)> {
        ensure_dim("feature width", self.dim(), cls.cols())?;
        let (h_spc, enc_cache) = self.f_spc.forward_cached(cls)?;
        let (logits, disc_cache) = self.d_spc.forward_cached(&h_spc)?;
        let (loss, d_logits) = softmax_xent(&logits, y_var)?;
        if accumulate {
            let d_h = self.d_spc.backward(&disc_cache, &d_logits)?;
            self.f_spc.backward(&enc_cache, &d_h)?;
        }
        Ok((loss, accuracy(&logits, y_var)))
    }

    /// Task loss over the per-word joint features, averaged over all words
    /// of the batch.
    pub fn loss_task(&mut self, batch: &Batch, accumulate: bool) -> Result<f64> {
        let tokens = &batch.tokens;
        ensure_dim("feature width", self.dim(), tokens.cols())?;
        let words = tokens.rows();
        if words == 0 {
            return Err(Error::Empty("batch words"));
        }
        let (h_inv, inv_cache) = self.f_inv.forward_cached(tokens)?;
        let (h_spc, spc_cache) = self.f_spc.forward_cached(tokens)?;
        let h = self.joint(&h_inv, &h_spc)?;
        let (loss, d_h) = match (&mut self.head, &batch.y_task) {
            (TaskHead::Pos(head), TaskTargets::Pos(gold)) => head.loss(&h, gold, accumulate)?,
            (TaskHead::Dep(head), TaskTargets::Dep { heads, rels }) => {
                ensure_dim("gold heads", words, heads.len())?;
                ensure_dim("gold relations", words, rels.len())?;
                let scale = 1.0 / words as f64;
                let mut total = 0.0;
                let mut d_h = Matrix::zeros(words, h.cols());
                for &(start, len) in &batch.spans {
                    let end = start + len;
                    let hs = h.row_range(start, end);
                    let (l, d) = head.loss(&hs, &heads[start..end], &rels[start..end], scale, accumulate)?;
                    total += l;
                    if accumulate {
                        for r in 0..len {
                            d_h.row_mut(start + r).copy_from_slice(d.row(r));
                        }
                    }
                }
                (total, d_h)
            }
            _ => {
                return Err(Error::Config(String::from(
                    "batch targets do not match the task head",
                )))
            }
        };
        if accumulate {
            let half = self.dim() / 2;
            let (mut d_inv, d_spc) = split_cols(&d_h, half)?;
            if self.mode == Mode::AlignmentOnly {
                d_inv.add_assign(&d_spc)?;
            } else {
                self.f_spc.backward(&spc_cache, &d_spc)?;
            }
            self.f_inv.backward(&inv_cache, &d_inv)?;
        }
        Ok(loss)
    }

    /// `L_inv + L_spc + L_task` over the active terms. Gradients of the
    /// active terms are accumulated when `accumulate` is set; discriminator
    /// accuracies are always reported.
    pub fn loss_total(&mut self, batch: &Batch, accumulate: bool) -> Result<LossBreakdown> {
        let inv_on = self.inv_active();
        let spc_on = self.spc_active();
        let (inv, inv_accuracy) = self.loss_inv(&batch.cls, &batch.y_var, accumulate && inv_on)?;
        let (spc, spc_accuracy) = self.loss_spc(&batch.cls, &batch.y_var, accumulate && spc_on)?;
        let task = self.loss_task(batch, accumulate)?;
        let inv = if inv_on { inv } else { 0.0 };
        let spc = if spc_on { spc } else { 0.0 };
        Ok(LossBreakdown {
            inv,
            spc,
            task,
            total: inv + spc + task,
            inv_accuracy,
            spc_accuracy,
        })
    }

    /// Word-level predictions for one sentence's token vectors: tags for POS,
    /// `(heads, relations)` for DEP (relations empty for POS).
    pub fn predict(&self, tokens: &Matrix) -> Result<(Vec<usize>, Vec<usize>)> {
        let h = self.encode(tokens)?.h;
        match &self.head {
            TaskHead::Pos(head) => Ok((head.predict(&h)?, Vec::new())),
            TaskHead::Dep(head) => head.predict(&h),
        }
    }

    /// Discriminator predictions for `[CLS]` rows: `(invariant, specific)`.
    pub fn predict_varieties(&self, cls: &Matrix) -> Result<(Vec<usize>, Vec<usize>)> {
        let enc = self.encode(cls)?;
        let inv = predict_rows(&self.d_inv.forward(&enc.h_inv)?);
        let spc = predict_rows(&self.d_spc.forward(&enc.h_spc)?);
        Ok((inv, spc))
    }
}

impl Parameters for DualEncoderModel {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.f_inv.visit_params(&join(prefix, "f_inv"), f);
        self.f_spc.visit_params(&join(prefix, "f_spc"), f);
        self.d_inv.visit_params(&join(prefix, "d_inv"), f);
        self.d_spc.visit_params(&join(prefix, "d_spc"), f);
        match &mut self.head {
            TaskHead::Pos(h) => h.visit_params(&join(prefix, "pos_head"), f),
            TaskHead::Dep(h) => h.visit_params(&join(prefix, "dep_head"), f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::objective_fixture;
    use rand::Rng;

    fn fixture(task: TaskKind, mode: Mode, ablation: Ablation, lambda: f64, seed: u64) -> (DualEncoderModel, Batch) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        objective_fixture(&mut rng, task, mode, ablation, lambda).unwrap()
    }

    /// Gradients of every tensor whose name starts with `prefix`.
    fn grads(model: &mut DualEncoderModel, prefix: &str) -> Vec<f64> {
        let mut out = Vec::new();
        model.visit_params("", &mut |name, p| {
            if name.starts_with(prefix) {
                out.extend_from_slice(p.grad.data());
            }
        });
        out
    }

    fn spec(dim: usize, varieties: usize) -> ModelSpec {
        ModelSpec {
            dim,
            hidden: 3,
            arc_dim: 2,
            task: TaskKind::Pos,
            varieties: (0..varieties).map(|v| alloc::format!("v{v}")).collect(),
            labels: LabelSpace::from_labels(["N", "V"]),
        }
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_encoders_give_zero_features() {
        let mut m = DualEncoderModel::new(spec(4, 2), Mode::Vacai, Ablation::FULL, 1.0, 0).unwrap();
        m.f_inv = Mlp::zeros(4, 3, 2);
        m.f_spc = Mlp::zeros(4, 3, 2);
        let enc = m.encode(&random_matrix(3, 4, 1)).unwrap();
        assert_eq!(enc.h, Matrix::zeros(3, 4));
    }

    #[test]
    fn joint_features_are_the_branch_outputs() {
        let m = DualEncoderModel::new(spec(6, 2), Mode::Vacai, Ablation::FULL, 1.0, 3).unwrap();
        let x = random_matrix(5, 6, 4);
        let enc = m.encode(&x).unwrap();
        assert_eq!(enc.h.cols(), 6);
        let (left, right) = split_cols(&enc.h, 3).unwrap();
        assert_eq!(left, m.f_inv.forward(&x).unwrap());
        assert_eq!(right, m.f_spc.forward(&x).unwrap());

        let order = [3, 0, 4, 1, 2];
        let permuted = Matrix::from_vec(
            5,
            6,
            order.iter().flat_map(|&r| x.row(r).to_vec()).collect(),
        )
        .unwrap();
        let enc_p = m.encode(&permuted).unwrap();
        for (i, &r) in order.iter().enumerate() {
            assert_eq!(enc_p.h.row(i), enc.h.row(r));
        }
        assert!(m.encode(&Matrix::zeros(1, 4)).is_err());
    }

    #[test]
    fn alignment_mode_duplicates_the_invariant_half() {
        let m = DualEncoderModel::new(spec(4, 2), Mode::AlignmentOnly, Ablation::FULL, 1.0, 3).unwrap();
        let enc = m.encode(&random_matrix(2, 4, 5)).unwrap();
        let (left, right) = split_cols(&enc.h, 2).unwrap();
        assert_eq!(left, enc.h_inv);
        assert_eq!(right, enc.h_inv);
    }

    #[test]
    fn zero_lambda_blocks_encoder_gradients_only() {
        let (mut m, b) = (0..)
            .map(|seed| fixture(TaskKind::Pos, Mode::Vacai, Ablation::FULL, 0.0, seed))
            .find(|(m, _)| m.spec.varieties.len() > 1)
            .unwrap();
        m.zero_grad();
        m.loss_inv(&b.cls, &b.y_var, true).unwrap();
        assert!(grads(&mut m, "f_inv.").iter().all(|&g| g == 0.0));
        assert!(grads(&mut m, "d_inv.").iter().any(|&g| g != 0.0));
    }

    #[test]
    fn unit_lambda_negates_the_plain_gradient() {
        let (mut m, b) = (0..)
            .map(|seed| fixture(TaskKind::Dep, Mode::Vacai, Ablation::FULL, 1.0, seed))
            .find(|(m, _)| m.spec.varieties.len() > 1)
            .unwrap();
        m.zero_grad();
        m.loss_inv(&b.cls, &b.y_var, true).unwrap();
        let reversed = grads(&mut m, "f_inv.");
        // a gate scaling by +1 is the plain chain rule without reversal
        m.grl.lambda = -1.0;
        m.zero_grad();
        m.loss_inv(&b.cls, &b.y_var, true).unwrap();
        let plain = grads(&mut m, "f_inv.");
        assert!(plain.iter().any(|&g| g != 0.0));
        for (r, p) in reversed.iter().zip(&plain) {
            assert_eq!(*r, -*p);
        }
    }

    #[test]
    fn single_variety_discriminator_loss_is_zero() {
        let mut m = DualEncoderModel::new(spec(4, 1), Mode::Vacai, Ablation::FULL, 1.0, 0).unwrap();
        let (l, acc) = m.loss_spc(&random_matrix(3, 4, 2), &[0, 0, 0], false).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn zero_discriminator_on_balanced_pair_gives_ln_two() {
        let mut m = DualEncoderModel::new(spec(4, 2), Mode::Vacai, Ablation::FULL, 1.0, 0).unwrap();
        m.d_spc = Mlp::zeros(2, 3, 2);
        let (l, _) = m.loss_spc(&random_matrix(4, 4, 2), &[0, 1, 0, 1], false).unwrap();
        assert!((l - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn total_is_the_sum_of_active_terms() {
        for seed in 0..20 {
            let (mut m, b) = fixture(TaskKind::Dep, Mode::Vacai, Ablation::FULL, 0.5, seed);
            let l = m.loss_total(&b, false).unwrap();
            let inv = m.loss_inv(&b.cls, &b.y_var, false).unwrap().0;
            let spc = m.loss_spc(&b.cls, &b.y_var, false).unwrap().0;
            let task = m.loss_task(&b, false).unwrap();
            assert!((l.total - (inv + spc + task)).abs() < 1e-12);
        }
        let off = Ablation { use_inv_loss: false, use_spc_loss: false };
        let (mut m, b) = fixture(TaskKind::Pos, Mode::Vacai, off, 1.0, 3);
        let l = m.loss_total(&b, false).unwrap();
        assert_eq!(l.total, m.loss_task(&b, false).unwrap());
        assert_eq!((l.inv, l.spc), (0.0, 0.0));
    }

    #[test]
    fn forward_value_does_not_depend_on_lambda() {
        for mode in [Mode::Baseline, Mode::AlignmentOnly, Mode::Vacai] {
            let (mut m, b) = fixture(TaskKind::Dep, mode, Ablation::FULL, 0.0, 21);
            let base = m.loss_total(&b, false).unwrap().total;
            for lambda in [0.1, 0.5, 1.0] {
                m.grl.lambda = lambda;
                assert!((m.loss_total(&b, true).unwrap().total - base).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn variety_losses_route_to_their_own_branch() {
        let only_inv = Ablation { use_inv_loss: true, use_spc_loss: false };
        let only_spc = Ablation { use_inv_loss: false, use_spc_loss: true };
        for (ablation, untouched) in [(only_inv, "f_spc."), (only_spc, "f_inv.")] {
            let (mut m, b) = fixture(TaskKind::Pos, Mode::Vacai, ablation, 1.0, 31);
            m.zero_grad();
            m.loss_total(&b, true).unwrap();
            let with_variety = grads(&mut m, untouched);
            m.zero_grad();
            m.loss_task(&b, true).unwrap();
            assert_eq!(with_variety, grads(&mut m, untouched));
        }
    }

    #[test]
    fn baseline_trains_no_discriminator() {
        let (mut m, b) = fixture(TaskKind::Pos, Mode::Baseline, Ablation::FULL, 1.0, 41);
        m.zero_grad();
        m.loss_total(&b, true).unwrap();
        assert!(grads(&mut m, "d_").iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mismatched_targets_are_rejected() {
        let (mut m, mut b) = fixture(TaskKind::Pos, Mode::Vacai, Ablation::FULL, 1.0, 5);
        let n = b.tokens.rows();
        b.y_task = TaskTargets::Dep { heads: alloc::vec![0; n], rels: alloc::vec![0; n] };
        assert!(m.loss_total(&b, false).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(DualEncoderModel::new(spec(3, 2), Mode::Vacai, Ablation::FULL, 1.0, 0).is_err());
        assert!(DualEncoderModel::new(spec(4, 0), Mode::Vacai, Ablation::FULL, 1.0, 0).is_err());
        assert!(DualEncoderModel::new(spec(4, 2), Mode::Vacai, Ablation::FULL, -1.0, 0).is_err());
    }

    #[test]
    fn modes_parse() {
        assert_eq!("vacai".parse::<Mode>().unwrap(), Mode::Vacai);
        assert_eq!("alignment".parse::<Mode>().unwrap(), Mode::AlignmentOnly);
        assert_eq!("baseline".parse::<Mode>().unwrap(), Mode::Baseline);
        assert!("other".parse::<Mode>().is_err());
    }
}
