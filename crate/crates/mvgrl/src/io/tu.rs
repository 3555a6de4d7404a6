//! TU graph-classification directories.
//!
//! A dataset `DS` is a directory holding
//! - `DS_A.txt`: one `i, j` edge per line, 1-indexed global node ids;
//! - `DS_graph_indicator.txt`: graph id (1-indexed, non-decreasing,
//!   contiguous) of every node;
//! - `DS_graph_labels.txt`: one integer label per graph;
//! - optional `DS_node_labels.txt`: one integer label per node;
//! - optional `DS_node_attributes.txt`: comma-separated reals per node.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mvgrl_core::{AttributedGraph, GraphCollection, Matrix};

use super::{for_each_record, parse_field, FormatError};

/// The `DS` prefix of the first `*_A.txt` file in `dir`.
pub fn prefix(dir: &Path) -> Result<String, FormatError> {
    let entries = std::fs::read_dir(dir).map_err(|e| FormatError::io(dir, e))?;
    let mut found: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter_map(|name| name.strip_suffix("_A.txt").map(str::to_owned))
        .collect();
    found.sort();
    found.into_iter().next().ok_or_else(|| {
        let name = dir.file_name().map_or_else(|| "DS".into(), |n| n.to_string_lossy().into_owned());
        FormatError::Missing {
            path: dir.join(format!("{name}_A.txt")),
        }
    })
}

fn file(dir: &Path, prefix: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{prefix}_{suffix}.txt"))
}

fn read_integers(path: &Path) -> Result<Vec<(u64, i64)>, FormatError> {
    let mut out = Vec::new();
    for_each_record(path, b',', |line, r| {
        out.push((line, parse_field::<i64>(r, 0, "integer")?));
        Ok(())
    })?;
    Ok(out)
}

/// Loads a TU dataset. Edges are symmetrized and deduplicated per graph and
/// graph labels are remapped to contiguous ids in ascending label order.
pub fn load_tu_dataset(dir: &Path) -> Result<GraphCollection, FormatError> {
    let prefix = prefix(dir)?;
    let indicator_path = file(dir, &prefix, "graph_indicator");
    let indicator = read_integers(&indicator_path)?;
    let mut graph_of = Vec::with_capacity(indicator.len());
    let mut sizes: Vec<usize> = Vec::new();
    for &(line, g) in &indicator {
        let expected_next = sizes.len() as i64 + 1;
        if g == expected_next {
            sizes.push(0);
        } else if g != expected_next - 1 || sizes.is_empty() {
            return Err(FormatError::Parse {
                path: indicator_path,
                line,
                message: format!("non-contiguous graph indicator {g} (expected {} or {expected_next})", expected_next - 1),
            });
        }
        *sizes.last_mut().expect("pushed above") += 1;
        graph_of.push(sizes.len() - 1);
    }
    let total = graph_of.len();
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut acc = 0;
    for &s in &sizes {
        offsets.push(acc);
        acc += s;
    }

    let labels_path = file(dir, &prefix, "graph_labels");
    let raw_labels = read_integers(&labels_path)?;
    if raw_labels.len() != sizes.len() {
        return Err(FormatError::invalid(
            &labels_path,
            format!("{} graph labels for {} graphs", raw_labels.len(), sizes.len()),
        ));
    }
    let vocabulary: BTreeMap<i64, usize> = {
        let mut distinct: Vec<i64> = raw_labels.iter().map(|&(_, l)| l).collect();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
    };

    let edges_path = file(dir, &prefix, "A");
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); sizes.len()];
    for_each_record(&edges_path, b',', |_, r| {
        let mut ends = [0usize; 2];
        for (k, end) in ends.iter_mut().enumerate() {
            let id: i64 = parse_field(r, k, "node id")?;
            if id < 1 || id as usize > total {
                return Err(format!("dangling node id {id} (nodes are 1..={total})"));
            }
            *end = id as usize - 1;
        }
        let (g, h) = (graph_of[ends[0]], graph_of[ends[1]]);
        if g != h {
            return Err(format!("edge joins graphs {} and {}", g + 1, h + 1));
        }
        edges[g].push((ends[0] - offsets[g], ends[1] - offsets[g]));
        Ok(())
    })?;

    let node_labels_path = file(dir, &prefix, "node_labels");
    let node_labels = if node_labels_path.is_file() {
        let l = read_integers(&node_labels_path)?;
        if l.len() != total {
            return Err(FormatError::invalid(
                &node_labels_path,
                format!("{} node labels for {total} nodes", l.len()),
            ));
        }
        Some(l.into_iter().map(|(_, v)| v).collect::<Vec<_>>())
    } else {
        None
    };

    let attributes_path = file(dir, &prefix, "node_attributes");
    let attributes = if attributes_path.is_file() {
        let m = super::table::read_matrix(&attributes_path, false)?;
        if m.rows() != total {
            return Err(FormatError::invalid(
                &attributes_path,
                format!("{} attribute rows for {total} nodes", m.rows()),
            ));
        }
        Some(m)
    } else {
        None
    };

    let mut graphs = Vec::with_capacity(sizes.len());
    for (g, (&n, &start)) in sizes.iter().zip(&offsets).enumerate() {
        let features = match &attributes {
            Some(m) => m.select_rows(&(start..start + n).collect::<Vec<_>>()),
            None => Matrix::zeros(n, 0),
        };
        let mut graph = AttributedGraph::from_edges(n, &edges[g], features)
            .map_err(|e| FormatError::graph(&edges_path, e))?
            .with_graph_label(vocabulary[&raw_labels[g].1]);
        if let Some(l) = &node_labels {
            graph = graph
                .with_node_labels(l[start..start + n].to_vec())
                .map_err(|e| FormatError::graph(&node_labels_path, e))?;
        }
        graphs.push(graph);
    }
    GraphCollection::new(graphs, vocabulary.len()).map_err(|e| FormatError::graph(&labels_path, e))
}
