//! VEMB binary embeddings and the sidecar subword token file.
//!
//! ```text
//! "VEMB" | version u32 = 1 | d u32 | record_count u32
//! per record: word_count u32 | cls_layer2 d*f32 | cls_final d*f32 | tokens word_count*d*f32
//! ```
//!
//! Little-endian throughout. Vectors are held as `f64` in memory, so a
//! write after a read reproduces the file byte for byte.

use lingen_core::corpus::{EmbeddingRecord, VarietyCorpus};
use lingen_core::nn::Matrix;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"VEMB";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum VembError {
    #[error("bad magic bytes, expected \"VEMB\"")]
    BadMagic,
    #[error("unsupported VEMB version {0}")]
    UnsupportedVersion(u32),
    #[error("embedding dimension {0} is not positive and even")]
    BadDimension(u32),
    #[error("file ends inside {0}")]
    Truncated(&'static str),
    #[error("{0} unexpected bytes after the last record")]
    TrailingBytes(usize),
    #[error("file has {found} records but the corpus has {expected} sentences")]
    RecordCount { expected: usize, found: usize },
    #[error("record {sentence} has {found} token vectors but the sentence has {expected} words")]
    TokenCount {
        sentence: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding dimension {found} differs from the expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sidecar has {found} lines but the corpus has {expected} sentences")]
    SidecarCount { expected: usize, found: usize },
}

/// Decoded file: dimension plus records in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct VembFile {
    pub dim: usize,
    pub records: Vec<EmbeddingRecord>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("VEMB counts fit in 32 bits");
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub fn write_vemb(dim: usize, records: &[EmbeddingRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION as usize);
    put_u32(&mut out, dim);
    put_u32(&mut out, records.len());
    for r in records {
        assert_eq!(r.dim(), dim, "records share the file dimension");
        put_u32(&mut out, r.word_count());
        put_f32s(&mut out, r.cls_layer2());
        put_f32s(&mut out, r.cls_final());
        put_f32s(&mut out, r.token_vectors().data());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&[u8], VembError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(VembError::Truncated(what))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, VembError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>, VembError> {
        let len = n.checked_mul(4).ok_or(VembError::Truncated(what))?;
        let b = self.take(len, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }
}

pub fn read_vemb(bytes: &[u8]) -> Result<VembFile, VembError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "header").map_err(|_| VembError::BadMagic)? != MAGIC {
        return Err(VembError::BadMagic);
    }
    let version = r.u32("header")?;
    if version != VERSION {
        return Err(VembError::UnsupportedVersion(version));
    }
    let d = r.u32("header")?;
    if d == 0 || d % 2 != 0 {
        return Err(VembError::BadDimension(d));
    }
    let dim = d as usize;
    let count = r.u32("header")? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let words = r.u32("record")? as usize;
        let cls_layer2 = r.f32s(dim, "record")?;
        let cls_final = r.f32s(dim, "record")?;
        let tokens = r.f32s(words * dim, "record")?;
        let tokens = Matrix::from_vec(words, dim, tokens).expect("sized by the reader");
        records.push(EmbeddingRecord::new(cls_layer2, cls_final, tokens).expect("dimension checked above"));
    }
    if r.pos != bytes.len() {
        return Err(VembError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(VembFile { dim, records })
}

/// Attaches the i-th record to the i-th sentence. `expected_dim`, when
/// given, must match the file.
pub fn attach(corpus: &mut VarietyCorpus, file: VembFile, expected_dim: Option<usize>) -> Result<(), VembError> {
    if let Some(expected) = expected_dim {
        if expected != file.dim {
            return Err(VembError::DimensionMismatch {
                expected,
                found: file.dim,
            });
        }
    }
    if file.records.len() != corpus.len() {
        return Err(VembError::RecordCount {
            expected: corpus.len(),
            found: file.records.len(),
        });
    }
    for (i, (s, rec)) in corpus.sentences.iter().zip(&file.records).enumerate() {
        if s.len() != rec.word_count() {
            return Err(VembError::TokenCount {
                sentence: i,
                expected: s.len(),
                found: rec.word_count(),
            });
        }
    }
    for (s, rec) in corpus.sentences.iter_mut().zip(file.records) {
        s.embedding = Some(rec);
    }
    Ok(())
}

pub fn read_sidecar(text: &str, corpus: &mut VarietyCorpus) -> Result<(), VembError> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != corpus.len() {
        return Err(VembError::SidecarCount {
            expected: corpus.len(),
            found: lines.len(),
        });
    }
    for (s, line) in corpus.sentences.iter_mut().zip(lines) {
        s.subword_tokens = line.split_whitespace().map(String::from).collect();
    }
    Ok(())
}

pub fn write_sidecar(corpus: &VarietyCorpus) -> String {
    let mut out = String::new();
    for s in &corpus.sentences {
        out.push_str(&s.subword_tokens.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use lingen_core::corpus::{Sentence, Split};

    fn record(words: usize, seed: f64) -> EmbeddingRecord {
        let v = |k: usize| (0..k).map(|i| seed + i as f64 * 0.25).collect::<Vec<f64>>();
        EmbeddingRecord::new(v(4), v(4).iter().map(|x| -x).collect(), Matrix::from_vec(words, 4, v(4 * words)).unwrap())
            .unwrap()
    }

    fn corpus(lens: &[usize]) -> VarietyCorpus {
        let sentences = lens
            .iter()
            .map(|&n| Sentence::from_words(&(0..n).map(|i| format!("w{i}")).collect::<Vec<_>>()))
            .collect();
        VarietyCorpus::new("xx", Split::Train, sentences).unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let recs = vec![record(2, 0.1), record(0, -3.0), record(3, 7.7)];
        let bytes = write_vemb(4, &recs);
        let file = read_vemb(&bytes).unwrap();
        assert_eq!(file.dim, 4);
        assert_eq!(write_vemb(4, &file.records), bytes);
        assert_eq!(bytes.len(), 16 + 3 * (4 + 32) + 5 * 16);
    }

    #[test]
    fn header_layout() {
        let bytes = write_vemb(2, &[]);
        assert_eq!(bytes, [b'V', b'E', b'M', b'B', 1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0]);
        let mut c = corpus(&[]);
        attach(&mut c, read_vemb(&bytes).unwrap(), None).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn distinct_errors() {
        let good = write_vemb(4, &[record(1, 0.0), record(2, 1.0)]);
        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(read_vemb(&bad), Err(VembError::BadMagic));
        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(read_vemb(&bad), Err(VembError::UnsupportedVersion(2)));
        let mut bad = good.clone();
        bad[8] = 3;
        assert_eq!(read_vemb(&bad), Err(VembError::BadDimension(3)));
        assert_eq!(read_vemb(&good[..good.len() - 1]), Err(VembError::Truncated("record")));
        let mut bad = good.clone();
        bad.push(0);
        assert_eq!(read_vemb(&bad), Err(VembError::TrailingBytes(1)));

        let file = read_vemb(&good).unwrap();
        let mut c = corpus(&[1, 2, 3]);
        assert_eq!(
            attach(&mut c, file.clone(), None),
            Err(VembError::RecordCount { expected: 3, found: 2 })
        );
        let mut c = corpus(&[1, 3]);
        assert_eq!(
            attach(&mut c, file.clone(), None),
            Err(VembError::TokenCount { sentence: 1, expected: 3, found: 2 })
        );
        let mut c = corpus(&[1, 2]);
        assert_eq!(
            attach(&mut c, file.clone(), Some(8)),
            Err(VembError::DimensionMismatch { expected: 8, found: 4 })
        );
        attach(&mut c, file, Some(4)).unwrap();
        assert_eq!(c.embedding_dim().unwrap(), Some(4));
    }

    #[test]
    fn sidecar_overrides_subwords() {
        let mut c = corpus(&[2, 1]);
        read_sidecar("w0 ##x w1\nw0\n", &mut c).unwrap();
        assert_eq!(c.sentences[0].subword_tokens, ["w0", "##x", "w1"]);
        assert_eq!(write_sidecar(&c), "w0 ##x w1\nw0\n");
        assert!(read_sidecar("only one\n", &mut c).is_err());
    }
}
