//! Deterministic synthetic varieties with known overlap and geometry.
//!
//! Every vector lives in one `dim`-wide space. Token vectors use a leading
//! position block; `[CLS]` vectors use a content block and one family block
//! per family (at `family_offset + family * family_stride`), placed by
//! offset and free to overlap the position block since the two kinds of
//! vector never mix.
//!
//! Token vectors are a word prototype (tag direction plus per-type jitter,
//! spread over everything after the position block), a sinusoidal code of
//! the word position in the position block, and isotropic noise. Final
//! `[CLS]` vectors are the variety centroid plus a per-sentence latent in
//! the content block (shared by all varieties when `parallel`), a
//! per-sentence latent in the variety's family block (shared by varieties
//! of the same family) and noise. Layer-2 `[CLS]` vectors carry only the
//! centroid and noise.
//!
//! Centroids realise `centroid_spread * distances` by classical
//! multidimensional scaling. Coordinate `k`, in order of decreasing
//! spread, is written to dimension `centroid_axes[k]`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{EmbeddingRecord, Sentence, Split, VarietyCorpus};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::topping::{euclidean, tj_similarity};

const ROOT_REL: &str = "root";

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub variety_ids: Vec<String>,
    /// Family index per variety.
    pub families: Vec<usize>,
    pub dim: usize,
    pub vocab_size: usize,
    /// Fraction of `vocab_size` types shared per pair; symmetric, unit diagonal.
    pub overlap_rate: Matrix,
    /// Relative centroid distances; symmetric, zero diagonal.
    pub distances: Matrix,
    pub centroid_spread: f64,
    /// Target dimension of each centroid coordinate.
    pub centroid_axes: Vec<usize>,
    pub token_noise: f64,
    pub cls_noise: f64,
    pub position_dims: usize,
    pub position_scale: f64,
    pub content_offset: usize,
    pub content_dims: usize,
    pub content_scale: f64,
    pub family_offset: usize,
    pub family_dims: usize,
    /// Offset between consecutive family blocks; 0 puts every family's
    /// latent in the same dimensions.
    pub family_stride: usize,
    pub family_scale: f64,
    /// Correlation of the family latents of two varieties in one family.
    pub family_sharing: f64,
    /// Norm of the tag direction in each prototype.
    pub tag_scale: f64,
    /// Per-type prototype jitter.
    pub type_scale: f64,
    /// Sentence `i` of every variety shares its length and latents.
    pub parallel: bool,
    pub sentences_per_variety: usize,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    /// Inclusive word-count range.
    pub sentence_length: (usize, usize),
    pub tagset_size: usize,
    pub relation_count: usize,
    pub seed: u64,
}

impl SynthConfig {
    /// Two unrelated varieties with default geometry.
    pub fn pair(overlap: f64, spread: f64, seed: u64) -> Self {
        let ids = vec![String::from("X"), String::from("Y")];
        let mut overlap_rate = Matrix::identity(2);
        overlap_rate.set(0, 1, overlap);
        overlap_rate.set(1, 0, overlap);
        let mut distances = Matrix::zeros(2, 2);
        distances.set(0, 1, 1.0);
        distances.set(1, 0, 1.0);
        SynthConfig {
            variety_ids: ids,
            families: vec![0, 1],
            dim: 32,
            vocab_size: 60,
            overlap_rate,
            distances,
            centroid_spread: spread,
            centroid_axes: vec![24, 25],
            token_noise: 0.1,
            cls_noise: 0.3,
            position_dims: 4,
            position_scale: 1.5,
            content_offset: 4,
            content_dims: 8,
            content_scale: 1.0,
            family_offset: 12,
            family_dims: 6,
            family_stride: 6,
            family_scale: 1.0,
            family_sharing: 1.0,
            tag_scale: 1.5,
            type_scale: 0.5,
            parallel: true,
            sentences_per_variety: 120,
            dev_sentences: 40,
            test_sentences: 40,
            sentence_length: (4, 10),
            tagset_size: 6,
            relation_count: 4,
            seed,
        }
    }

    pub fn n_varieties(&self) -> usize {
        self.variety_ids.len()
    }

    fn n_families(&self) -> usize {
        self.families.iter().max().map_or(0, |m| m + 1)
    }

    fn family_start(&self, family: usize) -> usize {
        self.family_offset + family * self.family_stride
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_varieties();
        let bad = |msg: &str| Err(Error::Config(String::from(msg)));
        if n == 0 {
            return bad("synth needs at least one variety");
        }
        let ids: BTreeSet<&String> = self.variety_ids.iter().collect();
        if ids.len() != n || self.variety_ids.iter().any(String::is_empty) {
            return bad("variety ids must be distinct and non-empty");
        }
        if self.families.len() != n {
            return bad("one family index per variety");
        }
        if self.dim == 0 || self.dim % 2 != 0 {
            return bad("dim must be positive and even");
        }
        if self.vocab_size == 0 || self.sentences_per_variety == 0 || self.tagset_size == 0 {
            return bad("vocab_size, sentences_per_variety and tagset_size must be positive");
        }
        if self.relation_count == 0 {
            return bad("relation_count must be positive");
        }
        let (lo, hi) = self.sentence_length;
        if lo == 0 || hi < lo {
            return bad("sentence_length must be a non-empty range of positive lengths");
        }
        if self.position_dims % 2 != 0 {
            return bad("position_dims must be even");
        }
        if self.position_dims >= self.dim
            || self.content_offset + self.content_dims > self.dim
            || self.family_start(self.n_families().saturating_sub(1)) + self.family_dims > self.dim
        {
            return bad("position, content and family blocks must fit in dim");
        }
        let axes: BTreeSet<usize> = self.centroid_axes.iter().copied().collect();
        if axes.is_empty() || axes.len() != self.centroid_axes.len() || axes.iter().any(|&a| a >= self.dim) {
            return bad("centroid_axes must be distinct dimensions below dim");
        }
        for m in [&self.overlap_rate, &self.distances] {
            if m.rows() != n || m.cols() != n {
                return bad("overlap_rate and distances must be n_varieties square");
            }
        }
        for i in 0..n {
            if self.overlap_rate.get(i, i) != 1.0 || self.distances.get(i, i) != 0.0 {
                return bad("overlap_rate needs a unit diagonal and distances a zero diagonal");
            }
            for j in 0..n {
                let r = self.overlap_rate.get(i, j);
                let dd = self.distances.get(i, j);
                if r != self.overlap_rate.get(j, i) || dd != self.distances.get(j, i) {
                    return bad("overlap_rate and distances must be symmetric");
                }
                if !(0.0..=1.0).contains(&r) || !(dd >= 0.0) || !dd.is_finite() {
                    return bad("overlap rates lie in [0, 1] and distances are finite and non-negative");
                }
            }
        }
        let scalars = [
            self.centroid_spread,
            self.token_noise,
            self.cls_noise,
            self.position_scale,
            self.content_scale,
            self.family_scale,
            self.tag_scale,
            self.type_scale,
        ];
        if !(0.0..=1.0).contains(&self.family_sharing) {
            return bad("family_sharing lies in [0, 1]");
        }
        if scalars.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad("scales and noise levels must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthVariety {
    pub id: String,
    pub train: VarietyCorpus,
    pub dev: VarietyCorpus,
    pub test: VarietyCorpus,
}

impl SynthVariety {
    pub fn split(&self, split: Split) -> &VarietyCorpus {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }
}

/// Exact facts about a generated suite.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub seed: u64,
    pub variety_ids: Vec<String>,
    pub vocab_sizes: Vec<usize>,
    /// Shared word types per pair.
    pub shared_types: Matrix,
    /// Token-length weighted Jaccard of the vocabularies.
    pub tj: Matrix,
    pub centroids: Vec<Vec<f64>>,
}

impl Manifest {
    pub fn centroid_distance(&self, i: usize, j: usize) -> f64 {
        euclidean(&self.centroids[i], &self.centroids[j])
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let n = self.variety_ids.len();
        let _ = writeln!(out, "seed\t{}", self.seed);
        let _ = writeln!(out, "variety\tvocab_size\tcentroid");
        for i in 0..n {
            let coords: Vec<String> = self.centroids[i].iter().map(|c| format!("{c:.6}")).collect();
            let _ = writeln!(out, "{}\t{}\t{}", self.variety_ids[i], self.vocab_sizes[i], coords.join(","));
        }
        let _ = writeln!(out, "a\tb\tshared_types\ttj\tcentroid_distance");
        for i in 0..n {
            for j in i + 1..n {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{:.6}\t{:.6}",
                    self.variety_ids[i],
                    self.variety_ids[j],
                    self.shared_types.get(i, j),
                    self.tj.get(i, j),
                    self.centroid_distance(i, j)
                );
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub config: SynthConfig,
    pub varieties: Vec<SynthVariety>,
    pub manifest: Manifest,
}

impl SynthData {
    pub fn corpora(&self, split: Split) -> Vec<VarietyCorpus> {
        self.varieties.iter().map(|v| v.split(split).clone()).collect()
    }

    pub fn variety(&self, id: &str) -> Option<&SynthVariety> {
        self.varieties.iter().find(|v| v.id == id)
    }
}

/// Pronounceable, unique spelling of a global type index.
fn spell(mut index: usize) -> String {
    const ONSETS: [&str; 12] = ["k", "t", "m", "s", "l", "v", "r", "n", "p", "d", "g", "h"];
    const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
    let mut word = String::new();
    loop {
        let syl = index % 60;
        word.push_str(ONSETS[syl / 5]);
        word.push_str(VOWELS[syl % 5]);
        index /= 60;
        if index == 0 {
            break;
        }
        index -= 1;
    }
    word
}

fn gaussian(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * scale
}

fn unit_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| gaussian(rng, 1.0)).collect();
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and eigenvectors as matrix columns.
fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| m.get(i, i)).collect(), v)
}

/// Classical MDS: `n` points (as rows of an `n x n` matrix) whose pairwise
/// distances equal `distances`.
pub fn embed_distances(distances: &Matrix) -> Result<Matrix> {
    let n = distances.rows();
    let mut b = Matrix::zeros(n, n);
    let sq = |i: usize, j: usize| distances.get(i, j) * distances.get(i, j);
    let row_mean: Vec<f64> = (0..n).map(|i| (0..n).map(|j| sq(i, j)).sum::<f64>() / n as f64).collect();
    let total: f64 = row_mean.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b.set(i, j, -0.5 * (sq(i, j) - row_mean[i] - row_mean[j] + total));
        }
    }
    let (values, vectors) = symmetric_eigen(&b);
    let tol = 1e-9 * values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut coords = Matrix::zeros(n, n);
    for (k, &e) in order.iter().enumerate() {
        let lambda = values[e];
        if lambda < -tol {
            return Err(Error::Config(String::from(
                "distance matrix is not realisable in Euclidean space",
            )));
        }
        let root = if lambda > tol { libm::sqrt(lambda) } else { 0.0 };
        let sign = (0..n)
            .map(|i| vectors.get(i, e))
            .find(|v| v.abs() > 1e-12)
            .map_or(1.0, f64::signum);
        for i in 0..n {
            coords.set(i, k, sign * vectors.get(i, e) * root);
        }
    }
    Ok(coords)
}

/// Global type indices per variety. Each variety draws exactly
/// `round(rate * vocab_size)` types from the vocabulary of every earlier
/// variety it overlaps with and coins fresh types for the rest.
fn build_vocabularies(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    let n = config.n_varieties();
    let size = config.vocab_size;
    let mut next_type = 0usize;
    let mut vocabs: Vec<Vec<usize>> = Vec::with_capacity(n);
    for v in 0..n {
        let mut vocab: Vec<usize> = Vec::with_capacity(size);
        for (u, earlier) in vocabs.iter().enumerate() {
            let want = libm::round(config.overlap_rate.get(u, v) * size as f64) as usize;
            let already = vocab.iter().filter(|t| earlier.contains(t)).count();
            let mut pool: Vec<usize> = earlier.iter().copied().filter(|t| !vocab.contains(t)).collect();
            pool.shuffle(rng);
            let take = want.saturating_sub(already);
            if take > pool.len() || vocab.len() + take > size {
                return Err(Error::Config(format!(
                    "overlap rates for {} exceed its vocabulary",
                    config.variety_ids[v]
                )));
            }
            vocab.extend(pool.into_iter().take(take));
        }
        while vocab.len() < size {
            vocab.push(next_type);
            next_type += 1;
        }
        vocab.sort_unstable();
        vocabs.push(vocab);
    }
    Ok(vocabs)
}

fn tag_of(type_index: usize, tagset: usize) -> usize {
    (type_index.wrapping_mul(7) + 3) % tagset
}

fn relation_of(dep_tag: usize, head_tag: usize, relations: usize) -> usize {
    (dep_tag + 2 * head_tag) % relations
}

struct Geometry {
    centroids: Vec<Vec<f64>>,
    tag_dirs: Vec<Vec<f64>>,
}

fn prototype(config: &SynthConfig, geometry: &Geometry, type_index: usize) -> Vec<f64> {
    let start = config.position_dims;
    let span = config.dim - start;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1_000 + type_index as u64);
    let tag = tag_of(type_index, config.tagset_size);
    let mut v = vec![0.0; config.dim];
    for k in 0..span {
        v[start + k] = config.tag_scale * geometry.tag_dirs[tag][k] + gaussian(&mut rng, config.type_scale / libm::sqrt(span as f64));
    }
    v
}

fn position_code(config: &SynthConfig, position: usize, out: &mut [f64]) {
    let planes = config.position_dims / 2;
    for k in 0..planes {
        let omega = core::f64::consts::PI / (8.0 * (1u64 << k) as f64) * 2.0;
        let angle = omega * position as f64;
        out[2 * k] += config.position_scale * libm::cos(angle);
        out[2 * k + 1] += config.position_scale * libm::sin(angle);
    }
}

fn split_size(config: &SynthConfig, split: Split) -> usize {
    match split {
        Split::Train => config.sentences_per_variety,
        Split::Dev => config.dev_sentences,
        Split::Test => config.test_sentences,
    }
}

fn split_stream(split: Split) -> u64 {
    match split {
        Split::Train => 0,
        Split::Dev => 1,
        Split::Test => 2,
    }
}

/// Per-sentence plan shared across varieties when `parallel`.
struct SentencePlan {
    length: usize,
    content: Vec<f64>,
    family: Vec<Vec<f64>>,
}

fn plan_sentences(config: &SynthConfig, split: Split, variety: Option<usize>) -> Vec<SentencePlan> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let stream = 10 + 10 * split_stream(split) + variety.map_or(0, |v| 1 + v as u64) * 1_000;
    rng.set_stream(stream);
    let (lo, hi) = config.sentence_length;
    (0..split_size(config, split))
        .map(|_| SentencePlan {
            length: rng.random_range(lo..=hi),
            content: (0..config.content_dims)
                .map(|_| gaussian(&mut rng, config.content_scale))
                .collect(),
            family: (0..config.n_families())
                .map(|_| {
                    (0..config.family_dims)
                        .map(|_| gaussian(&mut rng, config.family_scale))
                        .collect()
                })
                .collect(),
        })
        .collect()
}

fn build_split(
    config: &SynthConfig,
    geometry: &Geometry,
    vocab: &[usize],
    v: usize,
    split: Split,
    shared_plan: Option<&[SentencePlan]>,
) -> Result<VarietyCorpus> {
    let own_plan;
    let plan = match shared_plan {
        Some(p) => p,
        None => {
            own_plan = plan_sentences(config, split, Some(v));
            &own_plan
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(100 + 10 * v as u64 + split_stream(split));
    let d = config.dim;
    let family = config.families[v];
    let centroid = &geometry.centroids[v];
    let mut sentences = Vec::with_capacity(plan.len());
    for p in plan {
        let types: Vec<usize> = (0..p.length).map(|_| vocab[rng.random_range(0..vocab.len())]).collect();
        let words: Vec<String> = types.iter().map(|&t| spell(t)).collect();
        let tags: Vec<usize> = types.iter().map(|&t| tag_of(t, config.tagset_size)).collect();
        let mut tokens = Matrix::zeros(p.length, d);
        for (i, &t) in types.iter().enumerate() {
            let row = tokens.row_mut(i);
            row.copy_from_slice(&prototype(config, geometry, t));
            position_code(config, i + 1, &mut row[..config.position_dims]);
            for x in row.iter_mut() {
                *x += gaussian(&mut rng, config.token_noise);
            }
        }
        let mut cls_layer2 = centroid.clone();
        for x in cls_layer2.iter_mut() {
            *x += gaussian(&mut rng, config.cls_noise);
        }
        let mut cls_final = centroid.clone();
        let cs = config.content_offset;
        for (k, z) in p.content.iter().enumerate() {
            cls_final[cs + k] += z;
        }
        let fs = config.family_start(family);
        let shared = libm::sqrt(config.family_sharing);
        let own = libm::sqrt(1.0 - config.family_sharing);
        for (k, s) in p.family[family].iter().enumerate() {
            cls_final[fs + k] += shared * s + own * gaussian(&mut rng, config.family_scale);
        }
        for x in cls_final.iter_mut() {
            *x += gaussian(&mut rng, config.cls_noise);
        }
        let mut sentence = Sentence::from_words(&words);
        sentence.pos_tags = Some(tags.iter().map(|t| format!("T{t}")).collect());
        sentence.heads = Some((0..p.length).collect());
        sentence.deprels = Some(
            (0..p.length)
                .map(|i| {
                    if i == 0 {
                        String::from(ROOT_REL)
                    } else {
                        format!("r{}", relation_of(tags[i], tags[i - 1], config.relation_count))
                    }
                })
                .collect(),
        );
        sentence.embedding = Some(EmbeddingRecord::new(cls_layer2, cls_final, tokens)?);
        sentences.push(sentence);
    }
    VarietyCorpus::new(config.variety_ids[v].clone(), split, sentences)
}

pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let n = config.n_varieties();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocabs = build_vocabularies(config, &mut rng)?;

    let mut scaled = config.distances.clone();
    scaled.scale(config.centroid_spread);
    let coords = embed_distances(&scaled)?;
    for k in config.centroid_axes.len()..n {
        if (0..n).any(|v| coords.get(v, k).abs() > 1e-9 * (1.0 + config.centroid_spread)) {
            return Err(Error::Config(String::from(
                "distances need more centroid axes than configured",
            )));
        }
    }
    let centroids: Vec<Vec<f64>> = (0..n)
        .map(|v| {
            let mut c = vec![0.0; config.dim];
            for (k, &axis) in config.centroid_axes.iter().enumerate().take(n) {
                c[axis] = coords.get(v, k);
            }
            c
        })
        .collect();
    let mut tag_rng = ChaCha8Rng::seed_from_u64(config.seed);
    tag_rng.set_stream(2);
    let span = config.dim - config.position_dims;
    let tag_dirs = (0..config.tagset_size).map(|_| unit_vector(&mut tag_rng, span)).collect();
    let geometry = Geometry { centroids, tag_dirs };

    let mut varieties = Vec::with_capacity(n);
    let plans: Vec<Option<Vec<SentencePlan>>> = [Split::Train, Split::Dev, Split::Test]
        .into_iter()
        .map(|s| config.parallel.then(|| plan_sentences(config, s, None)))
        .collect();
    for v in 0..n {
        let mut splits = [Split::Train, Split::Dev, Split::Test]
            .into_iter()
            .zip(&plans)
            .map(|(s, p)| build_split(config, &geometry, &vocabs[v], v, s, p.as_deref()));
        varieties.push(SynthVariety {
            id: config.variety_ids[v].clone(),
            train: splits.next().unwrap()?,
            dev: splits.next().unwrap()?,
            test: splits.next().unwrap()?,
        });
    }

    let sets: Vec<BTreeSet<String>> = vocabs.iter().map(|vs| vs.iter().map(|&t| spell(t)).collect()).collect();
    let mut shared_types = Matrix::zeros(n, n);
    let mut tj = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            shared_types.set(i, j, sets[i].intersection(&sets[j]).count() as f64);
            tj.set(i, j, tj_similarity(&sets[i], &sets[j])?);
        }
    }
    let manifest = Manifest {
        seed: config.seed,
        variety_ids: config.variety_ids.clone(),
        vocab_sizes: vocabs.iter().map(Vec::len).collect(),
        shared_types,
        tj,
        centroids: geometry.centroids,
    };
    Ok(SynthData {
        config: config.clone(),
        varieties,
        manifest,
    })
}

/// Canonical three-variety suite: A and B share a family, most of their
/// vocabulary and nearby centroids; C shares nothing and sits far away.
pub fn triple_config(seed: u64) -> SynthConfig {
    let ids = vec![String::from("A"), String::from("B"), String::from("C")];
    let overlap_rate = Matrix::from_rows(&[[1.0, 0.6, 0.0], [0.6, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
    let distances = Matrix::from_rows(&[[0.0, 1.0, 4.0], [1.0, 0.0, 4.0], [4.0, 4.0, 0.0]]).unwrap();
    SynthConfig {
        variety_ids: ids,
        families: vec![0, 0, 1],
        overlap_rate,
        distances,
        centroid_spread: 3.0,
        centroid_axes: vec![12, 13],
        cls_noise: 0.1,
        position_scale: 0.7,
        content_offset: 0,
        content_dims: 4,
        content_scale: 0.5,
        family_sharing: 0.5,
        sentences_per_variety: 2200,
        test_sentences: 400,
        ..SynthConfig::pair(0.0, 1.0, seed)
    }
}

pub fn make_triple(seed: u64) -> SynthData {
    generate(&triple_config(seed)).expect("canonical triple configuration is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::token_type_set;
    use crate::topping::{select_overlap, select_sim, tj_similarity};

    fn small_triple(seed: u64) -> SynthConfig {
        SynthConfig {
            sentences_per_variety: 60,
            dev_sentences: 20,
            test_sentences: 20,
            ..triple_config(seed)
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let c = SynthConfig::pair(0.5, 1.0, 9);
        assert_eq!(generate(&c).unwrap(), generate(&c).unwrap());
        let other = SynthConfig::pair(0.5, 1.0, 10);
        assert_ne!(generate(&c).unwrap().varieties, generate(&other).unwrap().varieties);
    }

    #[test]
    fn full_and_zero_overlap() {
        let same = generate(&SynthConfig::pair(1.0, 1.0, 1)).unwrap();
        assert_eq!(same.manifest.tj.get(0, 1), 1.0);
        assert_eq!(same.manifest.shared_types.get(0, 1), 60.0);
        let apart = generate(&SynthConfig::pair(0.0, 1.0, 1)).unwrap();
        assert_eq!(apart.manifest.tj.get(0, 1), 0.0);
        let a = token_type_set(&apart.varieties[0].train);
        let b = token_type_set(&apart.varieties[1].train);
        assert!(a.is_disjoint(&b));
    }

    #[test]
    fn tj_grows_with_overlap_rate() {
        let tj: Vec<f64> = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
            .iter()
            .map(|&r| generate(&SynthConfig::pair(r, 1.0, 4)).unwrap().manifest.tj.get(0, 1))
            .collect();
        assert!(tj.windows(2).all(|w| w[0] < w[1]), "{tj:?}");
    }

    #[test]
    fn manifest_tj_matches_vocabulary_sets() {
        let mut c = SynthConfig::pair(0.5, 1.0, 2);
        c.sentences_per_variety = 2000;
        let data = generate(&c).unwrap();
        let a = token_type_set(&data.varieties[0].train);
        let b = token_type_set(&data.varieties[1].train);
        assert_eq!(a.len(), 60);
        assert_eq!(b.len(), 60);
        assert_eq!(tj_similarity(&a, &b).unwrap(), data.manifest.tj.get(0, 1));
        assert_eq!(a.intersection(&b).count(), 30);
    }

    #[test]
    fn centroids_realise_scaled_distances() {
        let data = generate(&small_triple(0)).unwrap();
        let c = &data.config;
        for i in 0..3 {
            for j in 0..3 {
                let want = c.centroid_spread * c.distances.get(i, j);
                assert!((data.manifest.centroid_distance(i, j) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn embedding_rejects_non_euclidean_distances() {
        let d = Matrix::from_rows(&[[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]]).unwrap();
        assert!(embed_distances(&d).is_err());
    }

    #[test]
    fn sentences_are_annotated_and_embedded() {
        let data = generate(&small_triple(3)).unwrap();
        for v in &data.varieties {
            for split in [Split::Train, Split::Dev, Split::Test] {
                let corpus = v.split(split);
                assert_eq!(corpus.variety_id, v.id);
                assert_eq!(corpus.len(), split_size(&data.config, split));
                for s in &corpus.sentences {
                    s.validate().unwrap();
                    let (lo, hi) = data.config.sentence_length;
                    assert!(s.len() >= lo && s.len() <= hi);
                    assert!(s.pos_tags.is_some() && s.deprels.is_some());
                    let heads = s.heads.as_ref().unwrap();
                    assert_eq!(heads.iter().filter(|&&h| h == 0).count(), 1);
                    let e = s.embedding.as_ref().unwrap();
                    assert_eq!(e.dim(), data.config.dim);
                }
            }
        }
    }

    #[test]
    fn parallel_varieties_share_sentence_lengths() {
        let data = generate(&small_triple(5)).unwrap();
        let lens = |v: usize| -> Vec<usize> {
            data.varieties[v].test.sentences.iter().map(Sentence::len).collect()
        };
        assert_eq!(lens(0), lens(1));
        assert_eq!(lens(0), lens(2));
    }

    #[test]
    fn triple_geometry_and_selection() {
        let data = generate(&small_triple(1)).unwrap();
        let m = &data.manifest;
        assert!(m.tj.get(0, 1) > 0.0);
        assert_eq!(m.tj.get(0, 2), 0.0);
        assert_eq!(m.tj.get(1, 2), 0.0);
        assert!(m.centroid_distance(0, 1) < m.centroid_distance(0, 2));
        let train = data.corpora(Split::Train);
        let sim = select_sim(&train[0], &train[1..]).unwrap();
        assert_eq!(sim[0].0, "B");
        let overlap = select_overlap(&train[0], &train[1..]).unwrap();
        assert_eq!(overlap[0].0, "B");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = SynthConfig::pair(0.5, 1.0, 0);
        let mut c = base.clone();
        c.dim = 16;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.overlap_rate.set(0, 1, 1.5);
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.centroid_axes = vec![3, 3];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.variety_ids[1] = String::from("X");
        assert!(c.validate().is_err());
        let mut c = base;
        c.distances.set(0, 1, 2.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn spelled_types_are_unique() {
        let words: BTreeSet<String> = (0..5000).map(spell).collect();
        assert_eq!(words.len(), 5000);
    }
}
