//! Node bundles: one graph for transductive node tasks.
//!
//! - `edges.tsv`: one `u<TAB>v` edge per line, 0-indexed;
//! - `features.csv`: one row of reals per node (optional header line);
//! - `labels.csv`: one integer label per node, last column (optional header);
//! - `train.txt`, `val.txt`, `test.txt`: one node id per line. A missing
//!   split file is an empty set; with all three missing there is no split.

use std::path::Path;

use mvgrl_core::{AttributedGraph, Split};

use super::table::{read_labels, read_matrix};
use super::{for_each_record, parse_field, FormatError};

pub const EDGES: &str = "edges.tsv";
pub const FEATURES: &str = "features.csv";
pub const LABELS: &str = "labels.csv";
pub const SPLITS: [&str; 3] = ["train.txt", "val.txt", "test.txt"];

fn read_ids(path: &Path, n: usize) -> Result<Vec<usize>, FormatError> {
    let mut ids = Vec::new();
    for_each_record(path, b'\t', |_, r| {
        let id: usize = parse_field(r, 0, "node id")?;
        if id >= n {
            return Err(format!("node id {id} out of range for {n} nodes"));
        }
        ids.push(id);
        Ok(())
    })?;
    Ok(ids)
}

/// Reads the train / val / test node sets of `dir`, if any split file exists.
pub fn read_split(dir: &Path, n: usize) -> Result<Option<Split>, FormatError> {
    if SPLITS.iter().all(|s| !dir.join(s).is_file()) {
        return Ok(None);
    }
    let mut parts = SPLITS.iter().map(|s| {
        let path = dir.join(s);
        if path.is_file() {
            read_ids(&path, n)
        } else {
            Ok(Vec::new())
        }
    });
    let split = Split {
        train: parts.next().expect("three splits")?,
        val: parts.next().expect("three splits")?,
        test: parts.next().expect("three splits")?,
    };
    split.validate(n).map_err(|e| FormatError::graph(dir, e))?;
    Ok(Some(split))
}

pub fn load_node_bundle(dir: &Path) -> Result<AttributedGraph, FormatError> {
    let features_path = dir.join(FEATURES);
    let features = read_matrix(&features_path, true)?;
    let n = features.rows();

    let edges_path = dir.join(EDGES);
    let mut edges = Vec::new();
    for_each_record(&edges_path, b'\t', |_, r| {
        let u: usize = parse_field(r, 0, "node id")?;
        let v: usize = parse_field(r, 1, "node id")?;
        if u >= n || v >= n {
            return Err(format!("edge ({u}, {v}) out of range for {n} nodes"));
        }
        edges.push((u, v));
        Ok(())
    })?;

    let labels_path = dir.join(LABELS);
    let labels = read_labels(&labels_path)?;
    if labels.len() != n {
        return Err(FormatError::invalid(
            &labels_path,
            format!("{} labels but {FEATURES} has {n} rows", labels.len()),
        ));
    }

    let mut g = AttributedGraph::from_edges(n, &edges, features)
        .map_err(|e| FormatError::graph(&edges_path, e))?
        .with_node_labels(labels)
        .map_err(|e| FormatError::graph(&labels_path, e))?;
    if let Some(split) = read_split(dir, n)? {
        g = g.with_split(split).map_err(|e| FormatError::graph(dir, e))?;
    }
    Ok(g)
}
