//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size        field
//! 0       8           magic  b"DGLKCKPT"
//! 8       4           format version (u32) = 1
//! 12      8           metadata length M (u64)
//! 20      M           metadata: UTF-8 `key = value` lines
//! ...     8 + 8       W0 rows, cols (u64, u64)
//! ...     8*r*c       W0 entries, f64 row-major
//! ...     8 + 8       W1 rows, cols
//! ...     8*r*c       W1 entries
//! ```
//!
//! The metadata holds the model config, the resolved run config, artifact
//! hashes and the validation ROC-AUC at save time. Weights are stored as raw
//! IEEE-754 bits, so a load returns exactly what was saved.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{FinalActivation, ModelConfig, ModelParams};
use crate::config::Descriptor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DGLKCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub meta: Descriptor,
}

impl Checkpoint {
    pub fn new(params: ModelParams, mut meta: Descriptor) -> Self {
        let c = params.config;
        meta.set("model.in_dim", c.in_dim);
        meta.set("model.hidden_dim", c.hidden_dim);
        meta.set("model.embed_dim", c.embed_dim);
        meta.set("model.dropout", c.dropout);
        meta.set("model.final_activation", c.final_activation.as_str());
        Self { params, meta }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = self.meta.to_text();
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        for w in [&self.params.w0, &self.params.w1] {
            out.extend_from_slice(&(w.nrows() as u64).to_le_bytes());
            out.extend_from_slice(&(w.ncols() as u64).to_le_bytes());
            for v in w.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let meta_len = r.u64()? as usize;
        let meta_text = std::str::from_utf8(r.take(meta_len)?)
            .map_err(|_| Error::Checkpoint("metadata is not UTF-8".into()))?;
        let meta = Descriptor::parse_text(meta_text)?;
        let w0 = r.matrix()?;
        let w1 = r.matrix()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        let config = ModelConfig {
            in_dim: meta.parse("model.in_dim")?,
            hidden_dim: meta.parse("model.hidden_dim")?,
            embed_dim: meta.parse("model.embed_dim")?,
            dropout: meta.parse("model.dropout")?,
            final_activation: meta.parse::<FinalActivation>("model.final_activation")?,
        };
        if w0.dim() != (config.in_dim, config.hidden_dim) || w1.dim() != (config.hidden_dim, config.embed_dim) {
            return Err(Error::Checkpoint("weight shapes disagree with metadata".into()));
        }
        let params = ModelParams { config, w0, w1 };
        if !params.is_finite() {
            return Err(Error::Checkpoint("non-finite weights".into()));
        }
        Ok(Self { params, meta })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self) -> Result<Array2<f64>> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|n| n.checked_mul(8).is_some())
            .ok_or_else(|| Error::Checkpoint("matrix too large".into()))?;
        let raw = self.take(n * 8)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
