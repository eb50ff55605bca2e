//! CoNLL-U reading and writing for the columns the pipeline uses: FORM,
//! UPOS, HEAD and DEPREL. Multiword ranges and empty nodes are skipped.

use std::fmt::Write as _;

use lingen_core::corpus::Sentence;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn column(value: &str) -> Option<String> {
    (value != "_").then(|| value.to_string())
}

/// Per-word annotation column; present only if every word carries a value.
fn finish_column<T>(values: Vec<Option<T>>) -> Option<Vec<T>> {
    values.into_iter().collect()
}

#[derive(Default)]
struct Pending {
    words: Vec<String>,
    tags: Vec<Option<String>>,
    heads: Vec<Option<usize>>,
    rels: Vec<Option<String>>,
}

impl Pending {
    fn take(&mut self) -> Option<Sentence> {
        if self.words.is_empty() {
            return None;
        }
        let p = std::mem::take(self);
        Some(Sentence {
            subword_tokens: p.words.clone(),
            words: p.words,
            pos_tags: finish_column(p.tags),
            heads: finish_column(p.heads),
            deprels: finish_column(p.rels),
            embedding: None,
        })
    }
}

pub fn parse_conllu(text: &str) -> Result<Vec<Sentence>, ParseError> {
    let mut sentences = Vec::new();
    let mut pending = Pending::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() {
            sentences.extend(pending.take());
            continue;
        }
        if row.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != 10 {
            return Err(ParseError {
                line,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0].parse().map_err(|_| ParseError {
            line,
            message: format!("token id '{}' is not an integer", cols[0]),
        })?;
        if id != pending.words.len() + 1 {
            return Err(ParseError {
                line,
                message: format!("token id {id} out of sequence"),
            });
        }
        let head = match cols[6] {
            "_" => None,
            h => Some(h.parse::<usize>().map_err(|_| ParseError {
                line,
                message: format!("head '{h}' is not a non-negative integer"),
            })?),
        };
        pending.words.push(cols[1].to_string());
        pending.tags.push(column(cols[3]));
        pending.heads.push(head);
        pending.rels.push(column(cols[7]));
    }
    sentences.extend(pending.take());
    Ok(sentences)
}

pub fn serialize_conllu(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for (i, word) in s.words.iter().enumerate() {
            let tag = s.pos_tags.as_ref().map_or("_", |t| t[i].as_str());
            let head = s.heads.as_ref().map_or_else(|| String::from("_"), |h| h[i].to_string());
            let rel = s.deprels.as_ref().map_or("_", |r| r[i].as_str());
            let _ = writeln!(out, "{}\t{word}\t_\t{tag}\t_\t_\t{head}\t{rel}\t_\t_", i + 1);
        }
        out.push('\n');
    }
    out
}
