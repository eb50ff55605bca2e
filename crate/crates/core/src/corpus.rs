//! In-memory corpus model shared by selection, training and analysis.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{ensure_dim, Error, Result};
use crate::nn::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(alloc::format!("unknown split '{other}'"))),
        }
    }
}

/// Encoder features for one sentence: the layer-2 and final `[CLS]` vectors
/// plus one row per word.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord {
    cls_layer2: Vec<f64>,
    cls_final: Vec<f64>,
    token_vectors: Matrix,
}

impl EmbeddingRecord {
    pub fn new(cls_layer2: Vec<f64>, cls_final: Vec<f64>, token_vectors: Matrix) -> Result<Self> {
        let d = cls_layer2.len();
        if d == 0 || d % 2 != 0 {
            return Err(Error::Config(alloc::format!(
                "embedding dimension must be positive and even, got {d}"
            )));
        }
        ensure_dim("cls_final dimension", d, cls_final.len())?;
        if token_vectors.rows() > 0 {
            ensure_dim("token vector dimension", d, token_vectors.cols())?;
        }
        let token_vectors = if token_vectors.rows() == 0 {
            Matrix::zeros(0, d)
        } else {
            token_vectors
        };
        Ok(EmbeddingRecord {
            cls_layer2,
            cls_final,
            token_vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.cls_layer2.len()
    }

    pub fn cls_layer2(&self) -> &[f64] {
        &self.cls_layer2
    }

    pub fn cls_final(&self) -> &[f64] {
        &self.cls_final
    }

    pub fn token_vectors(&self) -> &Matrix {
        &self.token_vectors
    }

    pub fn word_count(&self) -> usize {
        self.token_vectors.rows()
    }
}

/// One sentence with optional gold annotation and embeddings.
///
/// Annotation vectors, when present, hold one entry per word. Heads are
/// 1-based with 0 for the root.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sentence {
    pub words: Vec<String>,
    pub subword_tokens: Vec<String>,
    pub pos_tags: Option<Vec<String>>,
    pub heads: Option<Vec<usize>>,
    pub deprels: Option<Vec<String>>,
    pub embedding: Option<EmbeddingRecord>,
}

impl Sentence {
    /// Unannotated sentence whose subword tokens are its words.
    pub fn from_words<S: Into<String> + Clone>(words: &[S]) -> Self {
        let words: Vec<String> = words.iter().cloned().map(Into::into).collect();
        Sentence {
            subword_tokens: words.clone(),
            words,
            ..Sentence::default()
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.words.len();
        if let Some(tags) = &self.pos_tags {
            ensure_dim("pos tags per word", n, tags.len())?;
        }
        if let Some(rels) = &self.deprels {
            ensure_dim("relations per word", n, rels.len())?;
        }
        if let Some(heads) = &self.heads {
            ensure_dim("heads per word", n, heads.len())?;
            for (i, &h) in heads.iter().enumerate() {
                if h > n || h == i + 1 {
                    return Err(Error::Config(alloc::format!(
                        "invalid head {h} for word {} of {n}",
                        i + 1
                    )));
                }
            }
        }
        if let Some(e) = &self.embedding {
            ensure_dim("token vectors per word", n, e.word_count())?;
        }
        Ok(())
    }
}

/// Sentences of one language variety.
#[derive(Clone, Debug, PartialEq)]
pub struct VarietyCorpus {
    pub variety_id: String,
    pub split: Split,
    pub sentences: Vec<Sentence>,
}

impl VarietyCorpus {
    pub fn new(variety_id: impl Into<String>, split: Split, sentences: Vec<Sentence>) -> Result<Self> {
        let variety_id = variety_id.into();
        if variety_id.is_empty() {
            return Err(Error::Empty("variety id"));
        }
        for s in &sentences {
            s.validate()?;
        }
        let corpus = VarietyCorpus {
            variety_id,
            split,
            sentences,
        };
        corpus.embedding_dim()?;
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Shared embedding dimension, `None` when no sentence carries embeddings.
    pub fn embedding_dim(&self) -> Result<Option<usize>> {
        let mut dim = None;
        for s in &self.sentences {
            if let Some(e) = &s.embedding {
                match dim {
                    None => dim = Some(e.dim()),
                    Some(d) => ensure_dim("embedding dimension within corpus", d, e.dim())?,
                }
            }
        }
        Ok(dim)
    }

    /// Attaches one record per sentence, in order.
    pub fn attach_embeddings(&mut self, records: Vec<EmbeddingRecord>) -> Result<()> {
        ensure_dim("embedding records", self.sentences.len(), records.len())?;
        if let Some(first) = records.first() {
            for r in &records {
                ensure_dim("embedding dimension", first.dim(), r.dim())?;
            }
        }
        for (s, r) in self.sentences.iter().zip(&records) {
            ensure_dim("token vectors per word", s.len(), r.word_count())?;
        }
        for (s, r) in self.sentences.iter_mut().zip(records) {
            s.embedding = Some(r);
        }
        Ok(())
    }

    pub fn embedding(&self, sentence: usize) -> Result<&EmbeddingRecord> {
        self.sentences[sentence]
            .embedding
            .as_ref()
            .ok_or_else(|| Error::MissingEmbedding {
                variety: self.variety_id.clone(),
                sentence,
            })
    }

    /// `cls_final` rows of the given sentences.
    pub fn cls_final_rows(&self, indices: &[usize]) -> Result<Matrix> {
        let mut rows = Vec::with_capacity(indices.len());
        for &i in indices {
            rows.push(self.embedding(i)?.cls_final());
        }
        Matrix::from_rows(&rows)
    }
}

/// Distinct subword tokens across the corpus.
pub fn token_type_set(corpus: &VarietyCorpus) -> BTreeSet<String> {
    corpus
        .sentences
        .iter()
        .flat_map(|s| s.subword_tokens.iter().cloned())
        .collect()
}

/// Rejects collections with empty or repeated variety ids.
pub fn check_unique_ids<'a, I: IntoIterator<Item = &'a VarietyCorpus>>(corpora: I) -> Result<()> {
    let mut seen = BTreeSet::new();
    for c in corpora {
        if c.variety_id.is_empty() {
            return Err(Error::Empty("variety id"));
        }
        if !seen.insert(c.variety_id.as_str()) {
            return Err(Error::Config(alloc::format!(
                "duplicate variety id '{}'",
                c.variety_id
            )));
        }
    }
    Ok(())
}
