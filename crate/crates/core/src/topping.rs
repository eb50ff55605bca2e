//! Source-variety selection from unlabeled text.
//!
//! Two candidates are picked by independent rankings against the target:
//! the one whose mean layer-2 `[CLS]` vector is closest in Euclidean
//! distance, and the one with the highest token-length weighted Jaccard
//! similarity of subword type sets. The criteria are never merged into a
//! joint score.
//!
//! Ties in either ranking resolve by ascending variety id.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::{check_unique_ids, token_type_set, VarietyCorpus};
use crate::error::{ensure_dim, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionReport {
    pub target_id: String,
    /// Ascending centroid distance.
    pub sim_ranking: Vec<(String, f64)>,
    /// Descending weighted Jaccard score.
    pub overlap_ranking: Vec<(String, f64)>,
    /// `(v_sim, v_overlap)`.
    pub selected_pair: (String, String),
}

impl SelectionReport {
    pub fn distance_of(&self, id: &str) -> Option<f64> {
        self.sim_ranking.iter().find(|(v, _)| v == id).map(|e| e.1)
    }

    pub fn overlap_of(&self, id: &str) -> Option<f64> {
        self.overlap_ranking.iter().find(|(v, _)| v == id).map(|e| e.1)
    }
}

/// Mean of the layer-2 `[CLS]` vectors.
pub fn centroid(corpus: &VarietyCorpus) -> Result<Vec<f64>> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus for centroid"));
    }
    let d = corpus.embedding(0)?.dim();
    let mut sum = vec![0.0; d];
    for i in 0..corpus.len() {
        let v = corpus.embedding(i)?.cls_layer2();
        ensure_dim("cls_layer2 dimension", d, v.len())?;
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = corpus.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

fn by_score_then_id(a: &(String, f64), b: &(String, f64), descending: bool) -> Ordering {
    let ord = a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal);
    let ord = if descending { ord.reverse() } else { ord };
    ord.then_with(|| a.0.cmp(&b.0))
}

/// Candidates ranked by ascending centroid distance to the target.
pub fn select_sim(target: &VarietyCorpus, candidates: &[VarietyCorpus]) -> Result<Vec<(String, f64)>> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    check_unique_ids(candidates)?;
    let mu_target = centroid(target)?;
    let mut ranking = Vec::with_capacity(candidates.len());
    for c in candidates {
        let mu = centroid(c)?;
        ensure_dim("candidate embedding dimension", mu_target.len(), mu.len())?;
        ranking.push((c.variety_id.clone(), euclidean(&mu, &mu_target)));
    }
    ranking.sort_by(|a, b| by_score_then_id(a, b, false));
    Ok(ranking)
}

/// `max(1, len(tok) - 1)` with length in Unicode scalar values.
pub fn token_weight(tok: &str) -> Result<u64> {
    let len = tok.chars().count() as u64;
    if len == 0 {
        return Err(Error::Empty("token"));
    }
    Ok(len.saturating_sub(1).max(1))
}

/// Token-length weighted Jaccard similarity of two type sets.
pub fn tj_similarity(a: &BTreeSet<String>, b: &BTreeSet<String>) -> Result<f64> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::UndefinedSimilarity);
    }
    let mut inter = 0u64;
    let mut union = 0u64;
    for tok in a {
        let w = token_weight(tok)?;
        union += w;
        if b.contains(tok) {
            inter += w;
        }
    }
    for tok in b.difference(a) {
        union += token_weight(tok)?;
    }
    Ok(inter as f64 / union as f64)
}

/// Candidates ranked by descending weighted Jaccard similarity to the target.
pub fn select_overlap(
    target: &VarietyCorpus,
    candidates: &[VarietyCorpus],
) -> Result<Vec<(String, f64)>> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    check_unique_ids(candidates)?;
    let target_types = token_type_set(target);
    let mut ranking = Vec::with_capacity(candidates.len());
    for c in candidates {
        let score = tj_similarity(&token_type_set(c), &target_types)?;
        ranking.push((c.variety_id.clone(), score));
    }
    ranking.sort_by(|a, b| by_score_then_id(a, b, true));
    Ok(ranking)
}

/// Heads of both rankings. With `force_distinct`, a coinciding overlap pick
/// is replaced by the runner-up of the overlap ranking.
pub fn topping_pair(
    target: &VarietyCorpus,
    candidates: &[VarietyCorpus],
    force_distinct: bool,
) -> Result<SelectionReport> {
    if force_distinct && candidates.len() < 2 {
        return Err(Error::Config(String::from(
            "force_distinct needs at least two candidates",
        )));
    }
    let sim_ranking = select_sim(target, candidates)?;
    let overlap_ranking = select_overlap(target, candidates)?;
    let v_sim = sim_ranking[0].0.clone();
    let mut v_overlap = overlap_ranking[0].0.clone();
    if force_distinct && v_overlap == v_sim {
        v_overlap = overlap_ranking[1].0.clone();
    }
    Ok(SelectionReport {
        target_id: target.variety_id.clone(),
        sim_ranking,
        overlap_ranking,
        selected_pair: (v_sim, v_overlap),
    })
}
