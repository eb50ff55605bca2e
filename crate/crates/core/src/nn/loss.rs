use alloc::vec::Vec;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Cross entropy of one score row against `label`, with an optional column
/// removed from the candidate set.
///
/// Writes `scale * (softmax - onehot)` into `grad` (zero at the excluded
/// column) and returns the unscaled loss.
pub fn row_xent(
    scores: &[f64],
    label: usize,
    exclude: Option<usize>,
    scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    if label >= scores.len() || Some(label) == exclude {
        return Err(Error::LabelOutOfRange {
            label,
            classes: scores.len(),
        });
    }
    let live = |j: usize| Some(j) != exclude;
    let max = scores
        .iter()
        .enumerate()
        .filter(|&(j, _)| live(j))
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (j, (g, &s)) in grad.iter_mut().zip(scores).enumerate() {
        if live(j) {
            *g = libm::exp(s - max);
            total += *g;
        } else {
            *g = 0.0;
        }
    }
    for g in grad.iter_mut() {
        *g = *g / total * scale;
    }
    grad[label] -= scale;
    Ok(max + libm::log(total) - scores[label])
}

/// Mean softmax cross entropy over rows and its gradient w.r.t. the logits.
pub fn softmax_xent(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if labels.len() != logits.rows() {
        return Err(Error::Shape {
            what: "labels per logit row",
            expected: logits.rows(),
            found: labels.len(),
        });
    }
    if logits.rows() == 0 {
        return Err(Error::Empty("logit batch"));
    }
    let scale = 1.0 / logits.rows() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        loss += row_xent(logits.row(r), label, None, scale, grad.row_mut(r))?;
    }
    Ok((loss * scale, grad))
}

/// Index of the first maximum, skipping `exclude`.
pub fn argmax(values: &[f64], exclude: Option<usize>) -> usize {
    let mut best = usize::MAX;
    let mut best_val = f64::NEG_INFINITY;
    for (j, &v) in values.iter().enumerate() {
        if Some(j) == exclude {
            continue;
        }
        if best == usize::MAX || v > best_val {
            best = j;
            best_val = v;
        }
    }
    best
}

/// Row-wise argmax of a logit matrix.
pub fn predict_rows(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| argmax(logits.row(r), None))
        .collect()
}
