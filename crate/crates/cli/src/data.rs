//! Corpus references and loading from disk.
//!
//! A reference `ID=PREFIX` names `PREFIX.conllu` and `PREFIX.vemb`, plus
//! `PREFIX.tokens` when that file exists.

use std::fs;
use std::path::{Path, PathBuf};

use lingen_core::corpus::{Split, VarietyCorpus};

use crate::conllu::{parse_conllu, serialize_conllu};
use crate::error::{CliError, CliResult};
use crate::vemb::{attach, read_sidecar, read_vemb, write_sidecar, write_vemb};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusRef {
    pub id: String,
    pub prefix: PathBuf,
}

impl CorpusRef {
    pub fn parse(text: &str) -> CliResult<CorpusRef> {
        match text.split_once('=') {
            Some((id, prefix)) if !id.is_empty() && !prefix.is_empty() => Ok(CorpusRef {
                id: id.to_string(),
                prefix: PathBuf::from(prefix),
            }),
            _ => Err(CliError::Usage(format!("corpus reference '{text}' is not ID=PREFIX"))),
        }
    }

    pub fn with_ext(&self, ext: &str) -> PathBuf {
        let mut p = self.prefix.clone().into_os_string();
        p.push(".");
        p.push(ext);
        PathBuf::from(p)
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Loads sentences, embeddings and, if present, the subword sidecar.
pub fn load_corpus(r: &CorpusRef, split: Split) -> CliResult<VarietyCorpus> {
    let conllu_path = r.with_ext("conllu");
    let text = String::from_utf8(read(&conllu_path)?).map_err(|_| CliError::format(&conllu_path, "not UTF-8"))?;
    let sentences = parse_conllu(&text).map_err(|e| CliError::format(&conllu_path, e))?;
    let mut corpus = VarietyCorpus::new(r.id.clone(), split, sentences)?;

    let vemb_path = r.with_ext("vemb");
    let file = read_vemb(&read(&vemb_path)?).map_err(|e| CliError::format(&vemb_path, e))?;
    attach(&mut corpus, file, None).map_err(|e| CliError::format(&vemb_path, e))?;

    let tokens_path = r.with_ext("tokens");
    if tokens_path.exists() {
        let text = String::from_utf8(read(&tokens_path)?).map_err(|_| CliError::format(&tokens_path, "not UTF-8"))?;
        read_sidecar(&text, &mut corpus).map_err(|e| CliError::format(&tokens_path, e))?;
    }
    Ok(corpus)
}

pub fn load_all(refs: &[String], split: Split) -> CliResult<Vec<VarietyCorpus>> {
    refs.iter().map(|r| load_corpus(&CorpusRef::parse(r)?, split)).collect()
}

/// Writes the three files of a corpus under `prefix`.
pub fn save_corpus(prefix: &Path, corpus: &VarietyCorpus) -> CliResult<()> {
    let r = CorpusRef {
        id: corpus.variety_id.clone(),
        prefix: prefix.to_path_buf(),
    };
    let dim = corpus.embedding_dim()?.unwrap_or(2);
    let records: Vec<_> = (0..corpus.len())
        .map(|i| corpus.embedding(i).cloned())
        .collect::<Result<_, _>>()?;
    write(&r.with_ext("conllu"), serialize_conllu(&corpus.sentences))?;
    write(&r.with_ext("vemb"), write_vemb(dim, &records))?;
    write(&r.with_ext("tokens"), write_sidecar(corpus))
}
