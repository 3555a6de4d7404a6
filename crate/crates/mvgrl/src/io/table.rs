//! Numeric CSV tables: feature matrices, label columns, embeddings and loss
//! curves. Every table written here starts with a header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use mvgrl_core::training::EpochRecord;
use mvgrl_core::Matrix;

use super::{for_each_record, FormatError};

fn is_numeric_row(r: &csv::StringRecord) -> bool {
    r.iter().all(|f| f.parse::<f64>().is_ok())
}

/// Reads a dense real matrix, one row per line. With `allow_header`, a
/// first line that is not entirely numeric is skipped as a header.
pub fn read_matrix(path: &Path, allow_header: bool) -> Result<Matrix, FormatError> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    let mut first = true;
    for_each_record(path, b',', |_, r| {
        if std::mem::take(&mut first) && allow_header && !is_numeric_row(r) {
            return Ok(());
        }
        match cols {
            None => cols = Some(r.len()),
            Some(c) if c != r.len() => return Err(format!("expected {c} columns, found {}", r.len())),
            Some(_) => {}
        }
        for f in r {
            let v: f64 = f.parse().map_err(|_| format!("invalid number {f:?}"))?;
            if !v.is_finite() {
                return Err(format!("non-finite value {f:?}"));
            }
            data.push(v);
        }
        rows += 1;
        Ok(())
    })?;
    Matrix::from_vec(rows, cols.unwrap_or(0), data).map_err(|e| FormatError::invalid(path, e.to_string()))
}

/// Reads integer labels from the last column of every line, skipping a
/// non-numeric header line.
pub fn read_labels(path: &Path) -> Result<Vec<i64>, FormatError> {
    let mut out = Vec::new();
    let mut first = true;
    for_each_record(path, b',', |_, r| {
        let raw = r.get(r.len() - 1).unwrap_or_default();
        let parsed = raw.parse::<i64>();
        if std::mem::take(&mut first) && parsed.is_err() && !is_numeric_row(r) {
            return Ok(());
        }
        out.push(parsed.map_err(|_| format!("invalid label {raw:?}"))?);
        Ok(())
    })?;
    Ok(out)
}

/// Remaps arbitrary integer labels to `0..k` in ascending label order.
pub fn contiguous_labels(raw: &[i64]) -> (Vec<usize>, usize) {
    let mut distinct = raw.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mapped = raw
        .iter()
        .map(|l| distinct.binary_search(l).expect("label in vocabulary"))
        .collect();
    (mapped, distinct.len())
}

/// Whether embedding rows are nodes or graphs; also the id column name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Node,
    Graph,
}

impl EmbeddingKind {
    pub fn name(self) -> &'static str {
        match self {
            EmbeddingKind::Node => "node",
            EmbeddingKind::Graph => "graph",
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, FormatError> {
    File::create(path).map(BufWriter::new).map_err(|e| FormatError::io(path, e))
}

/// Writes `kind,e0,...,e{d-1}` followed by one row per node or graph.
/// Values use the shortest representation that parses back to the same
/// float, so equal embeddings give byte-identical files.
pub fn write_embeddings(path: &Path, kind: EmbeddingKind, emb: &Matrix) -> Result<(), FormatError> {
    let mut w = create(path)?;
    let mut write = || -> std::io::Result<()> {
        write!(w, "{}", kind.name())?;
        for j in 0..emb.cols() {
            write!(w, ",e{j}")?;
        }
        writeln!(w)?;
        for (i, row) in emb.iter_rows().enumerate() {
            write!(w, "{i}")?;
            for v in row {
                write!(w, ",{v:?}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    write().map_err(|e| FormatError::io(path, e))
}

/// Reads a file written by [`write_embeddings`].
pub fn read_embeddings(path: &Path) -> Result<(EmbeddingKind, Matrix), FormatError> {
    let mut kind = None;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = 0;
    for_each_record(path, b',', |_, r| {
        if kind.is_none() {
            kind = Some(match r.get(0) {
                Some("node") => EmbeddingKind::Node,
                Some("graph") => EmbeddingKind::Graph,
                other => return Err(format!("expected a `node` or `graph` header, found {other:?}")),
            });
            cols = r.len() - 1;
            return Ok(());
        }
        if r.len() != cols + 1 {
            return Err(format!("expected {} columns, found {}", cols + 1, r.len()));
        }
        let id: usize = r[0].parse().map_err(|_| format!("invalid row id {:?}", &r[0]))?;
        if id != rows {
            return Err(format!("row id {id} out of order (expected {rows})"));
        }
        for f in r.iter().skip(1) {
            data.push(f.parse::<f64>().map_err(|_| format!("invalid number {f:?}"))?);
        }
        rows += 1;
        Ok(())
    })?;
    let kind = kind.ok_or_else(|| FormatError::invalid(path, "empty embeddings file"))?;
    let m = Matrix::from_vec(rows, cols, data).map_err(|e| FormatError::invalid(path, e.to_string()))?;
    Ok((kind, m))
}

/// Writes `epoch,loss,mi_estimate`, one row per epoch.
pub fn write_loss(path: &Path, history: &[EpochRecord]) -> Result<(), FormatError> {
    let mut w = create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "epoch,loss,mi_estimate")?;
        for r in history {
            writeln!(w, "{},{:?},{:?}", r.epoch, r.loss, r.mi)?;
        }
        w.flush()
    };
    write().map_err(|e| FormatError::io(path, e))
}

/// Writes a header row and then the given rows, fields joined by commas.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| FormatError::invalid(path, e.to_string()))?;
    let mut write = || -> Result<(), csv::Error> {
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| FormatError::invalid(path, e.to_string()))
}
