//! Binary checkpoints: magic `EDMG`, version, tensor count, then per tensor
//! its name, rank, dimensions and f32 values, all little-endian.

use std::path::Path;

use thiserror::Error;

use super::{ModelConfig, ModelParams};

const MAGIC: &[u8; 4] = b"EDMG";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(String),
    #[error("not a checkpoint (bad magic)")]
    Magic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("checkpoint holds {found} tensors, configuration needs {expected}")]
    TensorCount { expected: usize, found: usize },
    #[error("tensor {index}: expected {expected:?}, found {found:?}")]
    Name { index: usize, expected: String, found: String },
    #[error("tensor {name}: shape {found:?} does not match configured {expected:?}")]
    Shape { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("{0} unexpected bytes after the last tensor")]
    Trailing(usize),
}

pub fn write_checkpoint(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + params.data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.layout.tensors.len() as u32).to_le_bytes());
    for (t, info) in params.layout.tensors.iter().enumerate() {
        out.extend_from_slice(&(info.name.len() as u16).to_le_bytes());
        out.extend_from_slice(info.name.as_bytes());
        out.push(info.shape.len() as u8);
        for &dim in &info.shape {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for &v in params.tensor(t) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Reads a checkpoint written for `config`, checking every tensor name and
/// shape against it.
pub fn read_checkpoint(bytes: &[u8], config: &ModelConfig) -> Result<ModelParams, CheckpointError> {
    let mut params = ModelParams::zeros(config).map_err(|e| CheckpointError::Io(e.to_string()))?;
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| CheckpointError::Magic)? != MAGIC {
        return Err(CheckpointError::Magic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let count = r.u32()? as usize;
    let expected = params.layout.tensors.len();
    for index in 0..count.min(expected) {
        let info = params.layout.tensors[index].clone();
        let len = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8_lossy(r.take(len)?).into_owned();
        if name != info.name {
            return Err(CheckpointError::Name { index, expected: info.name, found: name });
        }
        let rank = r.take(1)?[0] as usize;
        let shape = (0..rank).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
        if shape != info.shape {
            return Err(CheckpointError::Shape { name, expected: info.shape, found: shape });
        }
        let raw = r.take(info.len * 4)?;
        for (dst, chunk) in params.data[info.offset..info.offset + info.len].iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        }
    }
    if count != expected {
        return Err(CheckpointError::TensorCount { expected, found: count });
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Trailing(bytes.len() - r.pos));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, write_checkpoint(params)).map_err(|e| CheckpointError::Io(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path, config: &ModelConfig) -> Result<ModelParams, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|e| CheckpointError::Io(format!("{}: {e}", path.display())))?;
    read_checkpoint(&bytes, config)
}
