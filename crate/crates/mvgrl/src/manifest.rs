//! Run manifests and dataset fingerprints.

use std::io::Read;
use std::path::{Path, PathBuf};

use mvgrl_core::training::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::{DatasetFormat, FormatError};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: PathBuf,
    pub format: DatasetFormat,
    /// `sha256:` followed by the hex digest of [`fingerprint`].
    pub fingerprint: String,
}

/// Output files, relative to the run's output directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub checkpoint: Option<PathBuf>,
    pub loss: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub views: Vec<PathBuf>,
    pub reports: Vec<PathBuf>,
}

/// Everything needed to replay a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub dataset: DatasetRef,
    pub seed: u64,
    pub strict_deterministic: bool,
    pub config: TrainConfig,
    pub artifacts: Artifacts,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| FormatError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => FormatError::Missing { path: path.to_path_buf() },
            _ => FormatError::io(path, e),
        })?;
        serde_json::from_str(&text).map_err(|e| FormatError::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })
    }
}

pub fn tool_version() -> String {
    concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_owned()
}

/// SHA-256 over the regular files directly inside `dir`, in name order.
/// Each file contributes its name, a zero byte, its length as `u64`
/// little-endian and its contents.
pub fn fingerprint(dir: &Path) -> Result<String, FormatError> {
    let mut names: Vec<(String, PathBuf)> = std::fs::read_dir(dir)
        .map_err(|e| FormatError::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .filter_map(|p| Some((p.file_name()?.to_str()?.to_owned(), p)))
        .collect();
    names.sort();
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    for (name, path) in names {
        let mut file = std::fs::File::open(&path).map_err(|e| FormatError::io(&path, e))?;
        let len = file.metadata().map_err(|e| FormatError::io(&path, e))?.len();
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update(len.to_le_bytes());
        loop {
            let read = file.read(&mut buf).map_err(|e| FormatError::io(&path, e))?;
            if read == 0 {
                break;
            }
            hasher.update(&buf[..read]);
        }
    }
    Ok(format!("sha256:{:x}", hasher.finalize()))
}
