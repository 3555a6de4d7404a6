//! Dataset ingestion and tabular outputs.

pub mod bundle;
pub mod coo;
pub mod table;
pub mod tu;

use std::fs::File;
use std::path::{Path, PathBuf};

use mvgrl_core::graph::GraphError;
use mvgrl_core::{AttributedGraph, GraphCollection};
use thiserror::Error;

pub use bundle::load_node_bundle;
pub use tu::load_tu_dataset;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: required file is missing", path.display())]
    Missing { path: PathBuf },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Graph { path: PathBuf, source: GraphError },
}

impl FormatError {
    pub fn path(&self) -> &Path {
        match self {
            FormatError::Io { path, .. }
            | FormatError::Missing { path }
            | FormatError::Parse { path, .. }
            | FormatError::Invalid { path, .. }
            | FormatError::Graph { path, .. } => path,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn invalid(path: &Path, message: impl Into<String>) -> Self {
        FormatError::Invalid {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub(crate) fn graph(path: &Path, source: GraphError) -> Self {
        FormatError::Graph {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// On-disk dataset layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    /// TU graph-classification directory (`DS_A.txt`, ...).
    Tu,
    /// Single-graph node bundle (`edges.tsv`, `features.csv`, ...).
    Bundle,
}

impl DatasetFormat {
    /// Guesses the layout from the files present in `dir`.
    pub fn detect(dir: &Path) -> Result<Self, FormatError> {
        if !dir.is_dir() {
            return Err(FormatError::Missing { path: dir.to_path_buf() });
        }
        if dir.join(bundle::EDGES).is_file() {
            return Ok(DatasetFormat::Bundle);
        }
        if tu::prefix(dir).is_ok() {
            return Ok(DatasetFormat::Tu);
        }
        Err(FormatError::invalid(
            dir,
            format!("neither a TU directory (*_A.txt) nor a node bundle ({})", bundle::EDGES),
        ))
    }
}

/// A loaded dataset of either layout.
#[derive(Clone, Debug)]
pub enum Dataset {
    Graphs(GraphCollection),
    Nodes(AttributedGraph),
}

impl Dataset {
    pub fn graphs(&self) -> Vec<&AttributedGraph> {
        match self {
            Dataset::Graphs(c) => c.graphs().iter().collect(),
            Dataset::Nodes(g) => vec![g],
        }
    }
}

/// Loads `dir`, detecting the layout when `format` is `None`.
pub fn load_dataset(dir: &Path, format: Option<DatasetFormat>) -> Result<(Dataset, DatasetFormat), FormatError> {
    if !dir.is_dir() {
        return Err(FormatError::Missing { path: dir.to_path_buf() });
    }
    let format = match format {
        Some(f) => f,
        None => DatasetFormat::detect(dir)?,
    };
    let data = match format {
        DatasetFormat::Tu => Dataset::Graphs(load_tu_dataset(dir)?),
        DatasetFormat::Bundle => Dataset::Nodes(load_node_bundle(dir)?),
    };
    Ok((data, format))
}

/// Calls `f(line, fields)` for every non-empty record of a delimited text
/// file. Fields are trimmed; `#` starts a comment line. Errors returned by
/// `f` are reported with the file and line.
pub(crate) fn for_each_record(
    path: &Path,
    delimiter: u8,
    mut f: impl FnMut(u64, &csv::StringRecord) -> Result<(), String>,
) -> Result<(), FormatError> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            FormatError::Missing { path: path.to_path_buf() }
        } else {
            FormatError::io(path, e)
        }
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => return Ok(()),
            Ok(true) => {
                let line = record.position().map_or(line, |p| p.line());
                if record.iter().all(str::is_empty) {
                    continue;
                }
                f(line, &record).map_err(|message| FormatError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message,
                })?;
            }
            Err(e) => {
                let line = e.position().map_or(line, |p| p.line());
                return Err(FormatError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: e.to_string(),
                });
            }
        }
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, index: usize, what: &str) -> Result<T, String> {
    let raw = record
        .get(index)
        .ok_or_else(|| format!("expected a {what} in column {}", index + 1))?;
    raw.parse().map_err(|_| format!("invalid {what} {raw:?}"))
}
