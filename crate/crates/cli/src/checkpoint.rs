//! Binary model checkpoints.
//!
//! ```text
//! "VCKP" | version u32 = 1 | metadata_len u32 | metadata (UTF-8, key=value lines)
//! tensor_count u32
//! per tensor: name_len u32 | name | rows u32 | cols u32 | rows*cols*f64
//! ```
//!
//! Little-endian throughout. Metadata carries everything needed to rebuild
//! the model shape; tensors are then matched by name.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use lingen_core::model::{Ablation, DualEncoderModel, Mode, ModelSpec};
use lingen_core::nn::Parameters;
use lingen_core::tasks::{LabelSpace, TaskKind};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"VCKP";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CheckpointError {
    #[error("bad magic bytes, expected \"VCKP\"")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("file ends inside {0}")]
    Truncated(&'static str),
    #[error("metadata: {0}")]
    Metadata(String),
    #[error("tensor '{0}' is missing")]
    MissingTensor(String),
    #[error("tensor '{0}' does not belong to this model")]
    UnknownTensor(String),
    #[error("tensor '{name}' has shape {found:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{0} unexpected bytes after the last tensor")]
    TrailingBytes(usize),
    #[error(transparent)]
    Model(#[from] lingen_core::Error),
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("checkpoint sizes fit in 32 bits").to_le_bytes());
}

fn metadata(model: &DualEncoderModel) -> String {
    let spec = &model.spec;
    let mut m = String::new();
    let _ = writeln!(m, "dim={}", spec.dim);
    let _ = writeln!(m, "hidden={}", spec.hidden);
    let _ = writeln!(m, "arc_dim={}", spec.arc_dim);
    let _ = writeln!(m, "task={}", spec.task);
    let _ = writeln!(m, "mode={}", model.mode);
    let _ = writeln!(m, "use_inv_loss={}", model.ablation.use_inv_loss);
    let _ = writeln!(m, "use_spc_loss={}", model.ablation.use_spc_loss);
    let _ = writeln!(m, "lambda={}", model.grl.lambda);
    let _ = writeln!(m, "varieties={}", spec.varieties.join("\t"));
    let _ = writeln!(m, "labels={}", spec.labels.labels().join("\t"));
    m
}

pub fn write_checkpoint(model: &DualEncoderModel) -> Vec<u8> {
    let meta = metadata(model);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION as usize);
    put_u32(&mut out, meta.len());
    out.extend_from_slice(meta.as_bytes());
    let mut tensors = Vec::new();
    model.clone().visit_params("", &mut |name, p| {
        tensors.push((name.to_string(), p.value.rows(), p.value.cols(), p.value.data().to_vec()));
    });
    put_u32(&mut out, tensors.len());
    for (name, rows, cols, data) in tensors {
        put_u32(&mut out, name.len());
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, rows);
        put_u32(&mut out, cols);
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&[u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(CheckpointError::Truncated(what))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &'static str) -> Result<usize, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn text(&mut self, n: usize, what: &'static str) -> Result<String, CheckpointError> {
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| CheckpointError::Metadata(format!("{what} is not UTF-8")))
    }
}

fn parse_metadata(text: &str) -> Result<BTreeMap<&str, &str>, CheckpointError> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CheckpointError::Metadata(format!("line '{line}' is not key=value")))?;
        map.insert(k, v);
    }
    Ok(map)
}

fn field<'a>(meta: &BTreeMap<&str, &'a str>, key: &str) -> Result<&'a str, CheckpointError> {
    meta.get(key)
        .copied()
        .ok_or_else(|| CheckpointError::Metadata(format!("missing key '{key}'")))
}

fn parsed<T: std::str::FromStr>(meta: &BTreeMap<&str, &str>, key: &str) -> Result<T, CheckpointError> {
    let v = field(meta, key)?;
    v.parse()
        .map_err(|_| CheckpointError::Metadata(format!("bad value '{v}' for '{key}'")))
}

fn list(value: &str) -> Vec<String> {
    if value.is_empty() {
        Vec::new()
    } else {
        value.split('\t').map(String::from).collect()
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<DualEncoderModel, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "header").map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32("header")? as u32;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let meta_len = r.u32("header")?;
    let meta_text = r.text(meta_len, "metadata")?;
    let meta = parse_metadata(&meta_text)?;
    let spec = ModelSpec {
        dim: parsed(&meta, "dim")?,
        hidden: parsed(&meta, "hidden")?,
        arc_dim: parsed(&meta, "arc_dim")?,
        task: field(&meta, "task")?.parse::<TaskKind>()?,
        varieties: list(field(&meta, "varieties")?),
        labels: LabelSpace::from_labels(list(field(&meta, "labels")?)),
    };
    let mode: Mode = field(&meta, "mode")?.parse()?;
    let ablation = Ablation {
        use_inv_loss: parsed(&meta, "use_inv_loss")?,
        use_spc_loss: parsed(&meta, "use_spc_loss")?,
    };
    let lambda: f64 = parsed(&meta, "lambda")?;
    let mut model = DualEncoderModel::new(spec, mode, ablation, lambda, 0)?;

    let count = r.u32("tensor table")?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u32("tensor")?;
        let name = r.text(name_len, "tensor name")?;
        let rows = r.u32("tensor")?;
        let cols = r.u32("tensor")?;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or(CheckpointError::Truncated("tensor"))?;
        let data: Vec<f64> = r
            .take(len, "tensor")?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        tensors.insert(name, (rows, cols, data));
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }

    let mut failure = None;
    model.visit_params("", &mut |name, p| {
        if failure.is_some() {
            return;
        }
        let expected = (p.value.rows(), p.value.cols());
        match tensors.remove(name) {
            None => failure = Some(CheckpointError::MissingTensor(name.to_string())),
            Some((rows, cols, _)) if (rows, cols) != expected => {
                failure = Some(CheckpointError::TensorShape {
                    name: name.to_string(),
                    expected,
                    found: (rows, cols),
                })
            }
            Some((_, _, data)) => p.value.data_mut().copy_from_slice(&data),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(name) = tensors.into_keys().next() {
        return Err(CheckpointError::UnknownTensor(name));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(task: TaskKind, mode: Mode, seed: u64) -> DualEncoderModel {
        let spec = ModelSpec {
            dim: 6,
            hidden: 5,
            arc_dim: 3,
            task,
            varieties: vec!["a".into(), "b".into(), "c".into()],
            labels: LabelSpace::from_labels(["root", "nsubj", "obj"]),
        };
        let ablation = Ablation {
            use_inv_loss: true,
            use_spc_loss: false,
        };
        DualEncoderModel::new(spec, mode, ablation, 0.5, seed).unwrap()
    }

    #[test]
    fn round_trip_restores_every_tensor() {
        for (task, mode) in [(TaskKind::Dep, Mode::Vacai), (TaskKind::Pos, Mode::AlignmentOnly)] {
            let m = model(task, mode, 9);
            let bytes = write_checkpoint(&m);
            let back = read_checkpoint(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(write_checkpoint(&back), bytes);
        }
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let bytes = write_checkpoint(&model(TaskKind::Dep, Mode::Vacai, 1));
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert_eq!(read_checkpoint(&bad), Err(CheckpointError::BadMagic));
        assert!(matches!(
            read_checkpoint(&bytes[..bytes.len() - 3]),
            Err(CheckpointError::Truncated(_))
        ));
        let mut long = bytes.clone();
        long.push(1);
        assert_eq!(read_checkpoint(&long), Err(CheckpointError::TrailingBytes(1)));
    }

    #[test]
    fn shape_mismatch_names_the_tensor() {
        let dep = write_checkpoint(&model(TaskKind::Dep, Mode::Vacai, 1));
        let text = String::from_utf8_lossy(&dep).replace("hidden=5", "hidden=4");
        let err = read_checkpoint(text.as_bytes());
        assert!(err.is_err());
        let mut m = model(TaskKind::Dep, Mode::Vacai, 1);
        m.spec.arc_dim = 2;
        let meta_swapped = write_checkpoint(&m);
        match read_checkpoint(&meta_swapped) {
            Err(CheckpointError::TensorShape { name, .. }) => assert!(name.starts_with("dep_head")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
