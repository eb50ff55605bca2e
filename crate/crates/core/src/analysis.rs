//! Linear CKA between sentence-level representations of several varieties.
//!
//! CKA compares two matrices whose rows are paired examples. Corpora of
//! different varieties are paired by position: one seeded subsample of
//! `0..min_len` is drawn and the same indices are taken from every corpus.
//! For parallel corpora this pairs translations; for unrelated corpora the
//! pairing is arbitrary but reproducible.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::VarietyCorpus;
use crate::error::{ensure_dim, Error, Result};
use crate::model::DualEncoderModel;
use crate::nn::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureStage {
    /// Raw final-layer `[CLS]` vectors.
    Pretrained,
    /// Joint features `h` of a trained model.
    PostTraining,
}

impl FeatureStage {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureStage::Pretrained => "pretrained",
            FeatureStage::PostTraining => "post_training",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CkaReport {
    pub variety_ids: Vec<String>,
    /// Symmetric, unit diagonal.
    pub matrix: Matrix,
    pub feature_stage: FeatureStage,
    /// Rows per variety after pairing.
    pub sample_size: usize,
}

impl CkaReport {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.variety_ids.iter().position(|v| v == a)?;
        let j = self.variety_ids.iter().position(|v| v == b)?;
        Some(self.matrix.get(i, j))
    }
}

/// `||Xc^T Yc||_F^2 / (||Xc^T Xc||_F ||Yc^T Yc||_F)` with column-centered
/// copies of the inputs.
pub fn linear_cka(x: &Matrix, y: &Matrix) -> Result<f64> {
    ensure_dim("CKA paired rows", x.rows(), y.rows())?;
    if x.rows() < 2 {
        return Err(Error::Config(String::from("CKA needs at least two paired rows")));
    }
    let mut xc = x.clone();
    let mut yc = y.clone();
    xc.center_columns();
    yc.center_columns();
    let cross = xc.t_matmul(&yc)?.frobenius_sq();
    let xx = libm::sqrt(xc.t_matmul(&xc)?.frobenius_sq());
    let yy = libm::sqrt(yc.t_matmul(&yc)?.frobenius_sq());
    if xx == 0.0 || yy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((cross / (xx * yy)).clamp(0.0, 1.0))
}

/// Shared row indices for every corpus: a seeded permutation of
/// `0..min_len`, truncated to `sample_size`.
pub fn paired_indices(corpora: &[VarietyCorpus], sample_size: usize, seed: u64) -> Result<Vec<usize>> {
    let min_len = corpora
        .iter()
        .map(VarietyCorpus::len)
        .min()
        .ok_or(Error::Empty("corpus list"))?;
    let n = min_len.min(sample_size);
    if n < 2 {
        return Err(Error::Config(String::from(
            "each corpus needs at least two sentences for CKA",
        )));
    }
    let mut idx: Vec<usize> = (0..min_len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx.truncate(n);
    Ok(idx)
}

/// Sentence-level features: raw `cls_final` rows, or the model's joint `h`
/// of those rows.
pub fn sentence_features(
    model: Option<&DualEncoderModel>,
    corpus: &VarietyCorpus,
    indices: &[usize],
) -> Result<Matrix> {
    let cls = corpus.cls_final_rows(indices)?;
    match model {
        None => Ok(cls),
        Some(m) => Ok(m.encode(&cls)?.h),
    }
}

pub fn cka_report(
    model: Option<&DualEncoderModel>,
    corpora: &[VarietyCorpus],
    sample_size: usize,
    seed: u64,
) -> Result<CkaReport> {
    let indices = paired_indices(corpora, sample_size, seed)?;
    let features = corpora
        .iter()
        .map(|c| sentence_features(model, c, &indices))
        .collect::<Result<Vec<_>>>()?;
    let k = corpora.len();
    let mut matrix = Matrix::zeros(k, k);
    for i in 0..k {
        matrix.set(i, i, 1.0);
        for j in i + 1..k {
            let v = linear_cka(&features[i], &features[j])?;
            matrix.set(i, j, v);
            matrix.set(j, i, v);
        }
    }
    Ok(CkaReport {
        variety_ids: corpora.iter().map(|c| c.variety_id.clone()).collect(),
        matrix,
        feature_stage: if model.is_some() {
            FeatureStage::PostTraining
        } else {
            FeatureStage::Pretrained
        },
        sample_size: indices.len(),
    })
}
