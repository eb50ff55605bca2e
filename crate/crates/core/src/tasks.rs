//! Task heads (POS tagging, dependency arcs and relations) and their metrics.
//!
//! All metrics are micro-averaged over every word of the evaluated set.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::error::{ensure_dim, Error, Result};
use crate::nn::layers::join;
use crate::nn::{argmax, dot, row_xent, softmax_xent, AffineLayer, Matrix, Param, Parameters};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Pos,
    Dep,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Pos => "pos",
            TaskKind::Dep => "dep",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pos" => Ok(TaskKind::Pos),
            "dep" => Ok(TaskKind::Dep),
            other => Err(Error::Config(alloc::format!("unknown task '{other}'"))),
        }
    }
}

/// Ordered label inventory (POS tags or relations).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelSpace {
    labels: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl LabelSpace {
    /// Sorted, deduplicated inventory.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let index: BTreeMap<String, usize> =
            labels.into_iter().map(|l| (l.into(), 0)).collect();
        let labels: Vec<String> = index.keys().cloned().collect();
        let index = labels.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
        LabelSpace { labels, index }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.labels[idx]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Per-word tag classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct PosHead {
    pub classifier: AffineLayer,
}

impl PosHead {
    pub fn new<R: Rng + ?Sized>(dim: usize, tags: usize, rng: &mut R) -> Self {
        PosHead {
            classifier: AffineLayer::glorot(dim, tags, rng),
        }
    }

    pub fn forward(&self, h_words: &Matrix) -> Result<Matrix> {
        self.classifier.forward(h_words)
    }

    /// Mean cross entropy over words. With `accumulate`, adds parameter
    /// gradients and returns `dL/dh`.
    pub fn loss(&mut self, h_words: &Matrix, gold: &[usize], accumulate: bool) -> Result<(f64, Matrix)> {
        let logits = self.forward(h_words)?;
        let (loss, d_logits) = softmax_xent(&logits, gold)?;
        if !accumulate {
            return Ok((loss, Matrix::zeros(h_words.rows(), h_words.cols())));
        }
        let d_h = self.classifier.backward(h_words, &d_logits)?;
        Ok((loss, d_h))
    }

    pub fn predict(&self, h_words: &Matrix) -> Result<Vec<usize>> {
        Ok(crate::nn::loss::predict_rows(&self.forward(h_words)?))
    }
}

impl Parameters for PosHead {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.classifier.visit_params(&join(prefix, "classifier"), f);
    }
}

/// Bilinear arc scorer with a learned root vector, plus a relation
/// classifier over `[dependent | head]` features (zeros for the root).
#[derive(Clone, Debug, PartialEq)]
pub struct DepHead {
    pub head_proj: AffineLayer,
    pub dep_proj: AffineLayer,
    pub root: Param,
    pub rel_classifier: AffineLayer,
}

/// Intermediate values of one sentence's arc scoring.
#[derive(Clone, Debug)]
pub struct ArcScores {
    /// `n x (n + 1)`, column 0 is the root. The diagonal `(i, i + 1)` is a
    /// self-attachment and never a candidate.
    pub scores: Matrix,
    dep: Matrix,
    head: Matrix,
}

impl DepHead {
    pub fn new<R: Rng + ?Sized>(dim: usize, arc_dim: usize, rels: usize, rng: &mut R) -> Self {
        let head_proj = AffineLayer::glorot(dim, arc_dim, rng);
        let dep_proj = AffineLayer::glorot(dim, arc_dim, rng);
        let limit = libm::sqrt(3.0 / arc_dim as f64);
        let root = (0..arc_dim).map(|_| rng.random_range(-limit..limit)).collect();
        DepHead {
            head_proj,
            dep_proj,
            root: Param::new(Matrix::from_vec(1, arc_dim, root).expect("sized")),
            rel_classifier: AffineLayer::glorot(2 * dim, rels, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.head_proj.in_dim()
    }

    pub fn arc_scores(&self, h: &Matrix) -> Result<ArcScores> {
        let n = h.rows();
        if n == 0 {
            return Err(Error::Empty("sentence"));
        }
        let dep = self.dep_proj.forward(h)?;
        let head = self.head_proj.forward(h)?;
        let mut scores = Matrix::zeros(n, n + 1);
        let root = self.root.value.row(0);
        for i in 0..n {
            let di = dep.row(i);
            scores.set(i, 0, dot(di, root));
            for j in 0..n {
                scores.set(i, j + 1, dot(di, head.row(j)));
            }
        }
        Ok(ArcScores { scores, dep, head })
    }

    fn rel_features(h: &Matrix, heads: &[usize]) -> Result<Matrix> {
        let n = h.rows();
        let d = h.cols();
        let mut feats = Matrix::zeros(n, 2 * d);
        for (i, &g) in heads.iter().enumerate() {
            if g > n {
                return Err(Error::LabelOutOfRange {
                    label: g,
                    classes: n + 1,
                });
            }
            let row = feats.row_mut(i);
            row[..d].copy_from_slice(h.row(i));
            if g > 0 {
                row[d..].copy_from_slice(h.row(g - 1));
            }
        }
        Ok(feats)
    }

    /// Relation logits given (gold or predicted) heads.
    pub fn rel_logits(&self, h: &Matrix, heads: &[usize]) -> Result<Matrix> {
        ensure_dim("heads per word", h.rows(), heads.len())?;
        self.rel_classifier.forward(&Self::rel_features(h, heads)?)
    }

    /// Summed arc and relation cross entropy of one sentence, each word's
    /// terms multiplied by `scale`. With `accumulate`, parameter gradients
    /// are added and `dL/dh` is returned.
    pub fn loss(
        &mut self,
        h: &Matrix,
        gold_heads: &[usize],
        gold_rels: &[usize],
        scale: f64,
        accumulate: bool,
    ) -> Result<(f64, Matrix)> {
        let n = h.rows();
        ensure_dim("gold heads per word", n, gold_heads.len())?;
        ensure_dim("gold relations per word", n, gold_rels.len())?;
        let arcs = self.arc_scores(h)?;
        let mut d_scores = Matrix::zeros(n, n + 1);
        let mut loss = 0.0;
        for i in 0..n {
            loss += row_xent(
                arcs.scores.row(i),
                gold_heads[i],
                Some(i + 1),
                scale,
                d_scores.row_mut(i),
            )?;
        }
        let feats = Self::rel_features(h, gold_heads)?;
        let rel_logits = self.rel_classifier.forward(&feats)?;
        let mut d_rel = Matrix::zeros(n, rel_logits.cols());
        for i in 0..n {
            loss += row_xent(rel_logits.row(i), gold_rels[i], None, scale, d_rel.row_mut(i))?;
        }
        loss *= scale;
        let d = h.cols();
        let mut d_h = Matrix::zeros(n, d);
        if !accumulate {
            return Ok((loss, d_h));
        }

        let k = arcs.dep.cols();
        let mut d_dep = Matrix::zeros(n, k);
        let mut d_head = Matrix::zeros(n, k);
        let mut d_root = vec![0.0; k];
        let root = self.root.value.row(0).to_vec();
        for i in 0..n {
            let g0 = d_scores.get(i, 0);
            let di = arcs.dep.row(i);
            for c in 0..k {
                d_root[c] += g0 * di[c];
            }
            let row = d_dep.row_mut(i);
            for c in 0..k {
                row[c] += g0 * root[c];
            }
            for j in 0..n {
                let g = d_scores.get(i, j + 1);
                if g == 0.0 {
                    continue;
                }
                let hj = arcs.head.row(j);
                let row = d_dep.row_mut(i);
                for c in 0..k {
                    row[c] += g * hj[c];
                }
                let hrow = d_head.row_mut(j);
                for c in 0..k {
                    hrow[c] += g * di[c];
                }
            }
        }
        for (r, g) in self.root.grad.row_mut(0).iter_mut().zip(&d_root) {
            *r += g;
        }
        d_h.add_assign(&self.dep_proj.backward(h, &d_dep)?)?;
        d_h.add_assign(&self.head_proj.backward(h, &d_head)?)?;

        let d_feats = self.rel_classifier.backward(&feats, &d_rel)?;
        for (i, &g) in gold_heads.iter().enumerate() {
            let row = d_feats.row(i);
            for (a, b) in d_h.row_mut(i).iter_mut().zip(&row[..d]) {
                *a += b;
            }
            if g > 0 {
                for (a, b) in d_h.row_mut(g - 1).iter_mut().zip(&row[d..]) {
                    *a += b;
                }
            }
        }
        Ok((loss, d_h))
    }

    /// Greedy per-word head, then the best relation given that head.
    pub fn predict(&self, h: &Matrix) -> Result<(Vec<usize>, Vec<usize>)> {
        let arcs = self.arc_scores(h)?;
        let heads: Vec<usize> = (0..h.rows())
            .map(|i| argmax(arcs.scores.row(i), Some(i + 1)))
            .collect();
        let rels = crate::nn::loss::predict_rows(&self.rel_logits(h, &heads)?);
        Ok((heads, rels))
    }
}

impl Parameters for DepHead {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.head_proj.visit_params(&join(prefix, "head_proj"), f);
        self.dep_proj.visit_params(&join(prefix, "dep_proj"), f);
        f(&join(prefix, "root"), &mut self.root);
        self.rel_classifier.visit_params(&join(prefix, "rel_classifier"), f);
    }
}

/// Correct/total counters; sums over shards give micro averages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AttachmentCounts {
    pub words: usize,
    pub heads_correct: usize,
    pub labeled_correct: usize,
}

impl AttachmentCounts {
    pub fn add(
        &mut self,
        pred_heads: &[usize],
        pred_rels: &[usize],
        gold_heads: &[usize],
        gold_rels: &[usize],
    ) -> Result<()> {
        ensure_dim("predicted heads", gold_heads.len(), pred_heads.len())?;
        ensure_dim("predicted relations", gold_rels.len(), pred_rels.len())?;
        ensure_dim("gold relations", gold_heads.len(), gold_rels.len())?;
        for i in 0..gold_heads.len() {
            if pred_heads[i] == gold_heads[i] {
                self.heads_correct += 1;
                if pred_rels[i] == gold_rels[i] {
                    self.labeled_correct += 1;
                }
            }
        }
        self.words += gold_heads.len();
        Ok(())
    }

    pub fn merge(&mut self, other: &AttachmentCounts) {
        self.words += other.words;
        self.heads_correct += other.heads_correct;
        self.labeled_correct += other.labeled_correct;
    }

    pub fn uas(&self) -> Result<f64> {
        if self.words == 0 {
            return Err(Error::Empty("evaluation set"));
        }
        Ok(self.heads_correct as f64 / self.words as f64)
    }

    pub fn las(&self) -> Result<f64> {
        if self.words == 0 {
            return Err(Error::Empty("evaluation set"));
        }
        Ok(self.labeled_correct as f64 / self.words as f64)
    }
}

/// Fraction of words with the correct head.
pub fn uas<T: PartialEq>(pred_heads: &[T], gold_heads: &[T]) -> Result<f64> {
    ensure_dim("predicted heads", gold_heads.len(), pred_heads.len())?;
    if gold_heads.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let correct = pred_heads.iter().zip(gold_heads).filter(|(p, g)| p == g).count();
    Ok(correct as f64 / gold_heads.len() as f64)
}

/// Fraction of words with the correct head and relation.
pub fn las<H: PartialEq, L: PartialEq>(
    pred_heads: &[H],
    pred_rels: &[L],
    gold_heads: &[H],
    gold_rels: &[L],
) -> Result<f64> {
    ensure_dim("predicted heads", gold_heads.len(), pred_heads.len())?;
    ensure_dim("predicted relations", gold_rels.len(), pred_rels.len())?;
    ensure_dim("gold relations", gold_heads.len(), gold_rels.len())?;
    if gold_heads.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let correct = (0..gold_heads.len())
        .filter(|&i| pred_heads[i] == gold_heads[i] && pred_rels[i] == gold_rels[i])
        .count();
    Ok(correct as f64 / gold_heads.len() as f64)
}

/// Micro-averaged token F1. Every token carries exactly one prediction, so
/// precision and recall share a denominator and F1 equals accuracy.
pub fn token_f1<T: PartialEq>(pred: &[T], gold: &[T]) -> Result<f64> {
    ensure_dim("predicted tags", gold.len(), pred.len())?;
    if gold.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let tp = pred.iter().zip(gold).filter(|(p, g)| p == g).count() as f64;
    let precision = tp / pred.len() as f64;
    let recall = tp / gold.len() as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn attachment_hand_counts() {
        let gold_h = [2, 0, 2, 3];
        let gold_r = ["a", "root", "b", "c"];
        assert_eq!(uas(&gold_h, &gold_h).unwrap(), 1.0);
        assert_eq!(las(&gold_h, &gold_r, &gold_h, &gold_r).unwrap(), 1.0);
        // heads 1..3 right, word 4 wrong; relation of word 3 wrong
        let pred_h = [2, 0, 2, 1];
        let pred_r = ["a", "root", "x", "c"];
        assert_eq!(uas(&pred_h, &gold_h).unwrap(), 0.75);
        assert_eq!(las(&pred_h, &pred_r, &gold_h, &gold_r).unwrap(), 0.5);
        assert!(uas(&pred_h[..3], &gold_h).is_err());
    }

    #[test]
    fn f1_hand_counts() {
        let gold = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];
        let pred = [0, 1, 2, 3, 4, 5, 6, 0, 0, 0];
        assert_eq!(token_f1(&gold, &gold).unwrap(), 1.0);
        assert!((token_f1(&pred, &gold).unwrap() - 0.7).abs() < 1e-15);
        let empty: [usize; 0] = [];
        assert!(token_f1(&empty, &empty).is_err());
    }

    #[test]
    fn counters_match_direct_metrics() {
        let mut c = AttachmentCounts::default();
        c.add(&[2, 0], &[1, 0], &[2, 0], &[1, 1]).unwrap();
        c.add(&[0, 1], &[0, 0], &[2, 0], &[0, 0]).unwrap();
        assert_eq!(c.uas().unwrap(), 0.5);
        assert_eq!(c.las().unwrap(), 0.25);
        assert!(AttachmentCounts::default().uas().is_err());
    }

    #[test]
    fn label_space_is_sorted_and_deduplicated() {
        let s = LabelSpace::from_labels(["NOUN", "ADJ", "NOUN"]);
        assert_eq!(s.labels(), ["ADJ", "NOUN"]);
        assert_eq!(s.get("NOUN"), Some(1));
        assert_eq!(s.get("VERB"), None);
    }

    #[test]
    fn zero_pos_head_is_uniform() {
        let mut head = PosHead {
            classifier: AffineLayer::zeros(4, 5),
        };
        let h = Matrix::from_rows(&[[1.0, 2.0, 3.0, 4.0], [0.5, 0.0, 0.0, 1.0]]).unwrap();
        let (loss, _) = head.loss(&h, &[0, 4], false).unwrap();
        assert!((loss - libm::log(5.0)).abs() < 1e-15);
    }

    #[test]
    fn single_word_pos_loss_is_its_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut head = PosHead::new(3, 4, &mut rng);
        let h = random_matrix(1, 3, &mut rng);
        let (loss, _) = head.loss(&h, &[2], false).unwrap();
        let logits = head.forward(&h).unwrap();
        let row = logits.row(0);
        let lse = libm::log(row.iter().map(|v| libm::exp(*v)).sum::<f64>());
        assert!((loss - (lse - row[2])).abs() < 1e-12);
    }

    #[test]
    fn pos_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut head = PosHead::new(6, 5, &mut rng);
        let h = random_matrix(7, 6, &mut rng);
        let gold = [0, 1, 2, 3, 4, 0, 2];
        let err = check_params(&mut head, 1e-5, |m, acc| m.loss(&h, &gold, acc).unwrap().0);
        assert!(err < 1e-6, "pos head error {err}");
    }

    #[test]
    fn arc_score_shape_and_single_word() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let head = DepHead::new(6, 4, 3, &mut rng);
        let h = random_matrix(4, 6, &mut rng);
        let arcs = head.arc_scores(&h).unwrap();
        assert_eq!((arcs.scores.rows(), arcs.scores.cols()), (4, 5));
        let one = random_matrix(1, 6, &mut rng);
        let (heads, _) = head.predict(&one).unwrap();
        assert_eq!(heads, [0]);
        assert_eq!(uas(&heads, &[0]).unwrap(), 1.0);
    }

    #[test]
    fn dep_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut head = DepHead::new(6, 4, 3, &mut rng);
        let h = random_matrix(3, 6, &mut rng);
        let gold_heads = [0, 1, 1];
        let gold_rels = [2, 0, 1];
        let err = check_params(&mut head, 1e-5, |m, acc| {
            m.loss(&h, &gold_heads, &gold_rels, 1.0 / 3.0, acc).unwrap().0
        });
        assert!(err < 1e-6, "dep head error {err}");
        let err = crate::nn::gradcheck::check_input_gradient(&h, 1e-5, |x| {
            let mut m = head.clone();
            m.loss(x, &gold_heads, &gold_rels, 1.0 / 3.0, true).unwrap()
        });
        assert!(err < 1e-6, "dep input error {err}");
    }

    #[test]
    fn gold_head_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut head = DepHead::new(2, 2, 2, &mut rng);
        let h = random_matrix(2, 2, &mut rng);
        assert!(head.loss(&h, &[0, 3], &[0, 0], 0.5, false).is_err());
    }

    #[test]
    fn greedy_heads_ignore_monotone_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let head = DepHead::new(4, 3, 2, &mut rng);
        let h = random_matrix(5, 4, &mut rng);
        let arcs = head.arc_scores(&h).unwrap();
        for i in 0..5 {
            let row = arcs.scores.row(i);
            let squashed: Vec<f64> = row.iter().map(|s| libm::atan(3.0 * s) + 7.0).collect();
            assert_eq!(argmax(row, Some(i + 1)), argmax(&squashed, Some(i + 1)));
        }
    }

    #[test]
    fn dep_loss_overfits_a_single_sentence() {
        use crate::nn::Adam;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut head = DepHead::new(8, 8, 3, &mut rng);
        let h = random_matrix(5, 8, &mut rng);
        let gold_heads = [0, 1, 2, 3, 4];
        let gold_rels = [0, 1, 2, 1, 0];
        let adam = Adam::new(1e-2);
        let mut last = f64::INFINITY;
        for t in 1..=500u64 {
            head.zero_grad();
            last = head.loss(&h, &gold_heads, &gold_rels, 0.2, true).unwrap().0;
            head.visit_params("", &mut |_, p| p.adam_update(&adam, t).unwrap());
        }
        assert!(last < 0.01, "loss after 500 steps: {last}");
    }
}
