//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//! - magic `MVGK`, `u32` format version;
//! - `u32` byte length and a UTF-8 JSON header holding the training
//!   configuration, the input width and the parameter manifest (name and
//!   shape of every tensor, in order);
//! - every tensor's entries as row-major `f64` little-endian.
//!
//! Values are stored bit for bit, so a save/load round trip is exact.

use std::path::Path;

use mvgrl_core::model::{Model, ModelError, ParamSet};
use mvgrl_core::training::TrainConfig;
use mvgrl_core::Matrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"MVGK";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{}: {source}", path.display())]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("not a checkpoint (bad magic bytes)")]
    Magic,
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    Version(u32),
    #[error("checkpoint truncated: {0}")]
    Truncated(&'static str),
    #[error("{} trailing bytes after the last tensor", .0)]
    Trailing(usize),
    #[error("malformed checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub config: TrainConfig,
    pub in_dim: usize,
    pub tensors: Vec<TensorEntry>,
}

/// A trained model together with the configuration that built it.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, model: Model) -> Self {
        Self { config, model }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            config: self.config.clone(),
            in_dim: self.model.config().in_dim,
            tensors: self
                .model
                .params()
                .iter()
                .map(|(name, m)| TensorEntry {
                    name: name.to_owned(),
                    rows: m.rows(),
                    cols: m.cols(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let scalars = self.model.params().scalar_count();
        let mut out = Vec::with_capacity(12 + json.len() + 8 * scalars);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, m) in self.model.params().iter() {
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut cur = bytes;
        let mut take = |n: usize, what: &'static str| -> Result<&[u8], CheckpointError> {
            if cur.len() < n {
                return Err(CheckpointError::Truncated(what));
            }
            let (head, rest) = cur.split_at(n);
            cur = rest;
            Ok(head)
        };
        if take(4, "magic")? != MAGIC {
            return Err(CheckpointError::Magic);
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("four bytes"));
        let version = u32_at(take(4, "version")?);
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let len = u32_at(take(4, "header length")?) as usize;
        let header: Header = serde_json::from_slice(take(len, "header")?)?;
        let mut params = ParamSet::new();
        for t in &header.tensors {
            let count = t.rows.checked_mul(t.cols).ok_or(CheckpointError::Truncated("tensor size"))?;
            let raw = take(count.checked_mul(8).ok_or(CheckpointError::Truncated("tensor size"))?, "tensor data")?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
                .collect();
            let m = Matrix::from_vec(t.rows, t.cols, data).expect("length checked");
            params.push(t.name.clone(), m);
        }
        if !cur.is_empty() {
            return Err(CheckpointError::Trailing(cur.len()));
        }
        let model = Model::from_params(header.config.model_config(header.in_dim), params)?;
        Ok(Self {
            config: header.config,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}
