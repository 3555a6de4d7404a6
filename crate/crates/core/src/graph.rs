//! Attributed graphs, adjacency normalization, sub-sampling and feature
//! initialization.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::linalg::{LinalgError, Matrix, SparseMatrix};
use crate::math;

/// Degree one-hot features use this many buckets minus one unless configured.
pub const DEFAULT_DEGREE_CAP: usize = 400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("adjacency must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("adjacency must be symmetric (entry ({row}, {col}) has no mirror)")]
    Asymmetric { row: usize, col: usize },
    #[error("adjacency must have a zero diagonal (node {0} has a self-loop)")]
    SelfLoop(usize),
    #[error("feature matrix has {features} rows but the graph has {nodes} nodes")]
    FeatureRows { features: usize, nodes: usize },
    #[error("{what} has {len} entries but the graph has {nodes} nodes")]
    LabelCount {
        what: &'static str,
        len: usize,
        nodes: usize,
    },
    #[error("node index {index} out of range for a graph with {nodes} nodes")]
    NodeOutOfRange { index: usize, nodes: usize },
    #[error("node sample is empty")]
    EmptySample,
    #[error("node {node} appears in both the {first} and {second} splits")]
    OverlappingSplit {
        node: usize,
        first: &'static str,
        second: &'static str,
    },
    #[error("feature policy requires node labels, but the graph has none")]
    MissingNodeLabels,
    #[error("node label {0} is not in the label vocabulary")]
    UnknownNodeLabel(i64),
    #[error("graph {index} has no graph label")]
    MissingGraphLabel { index: usize },
    #[error("graph {index} has label {label}, outside [0, {classes})")]
    GraphLabelRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("graphs disagree on feature width ({0} vs {1})")]
    FeatureWidth(usize, usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Disjoint train / validation / test node sets.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Checks range and pairwise disjointness.
    pub fn validate(&self, n: usize) -> Result<(), GraphError> {
        let parts: [(&'static str, &[usize]); 3] =
            [("train", &self.train), ("val", &self.val), ("test", &self.test)];
        let mut owner: Vec<Option<&'static str>> = vec![None; n];
        for (name, ids) in parts {
            for &id in ids {
                if id >= n {
                    return Err(GraphError::NodeOutOfRange { index: id, nodes: n });
                }
                if let Some(first) = owner[id] {
                    if first != name {
                        return Err(GraphError::OverlappingSplit {
                            node: id,
                            first,
                            second: name,
                        });
                    }
                }
                owner[id] = Some(name);
            }
        }
        Ok(())
    }
}

/// An undirected graph with node features and optional labels.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributedGraph {
    adjacency: SparseMatrix,
    pub features: Matrix,
    pub node_labels: Option<Vec<i64>>,
    pub graph_label: Option<usize>,
    pub split: Option<Split>,
}

impl AttributedGraph {
    /// Validates that the adjacency is square, symmetric and loop-free and
    /// that the feature matrix has one row per node.
    pub fn new(adjacency: SparseMatrix, features: Matrix) -> Result<Self, GraphError> {
        check_adjacency(&adjacency)?;
        if features.rows() != adjacency.n_rows() {
            return Err(GraphError::FeatureRows {
                features: features.rows(),
                nodes: adjacency.n_rows(),
            });
        }
        Ok(Self {
            adjacency,
            features,
            node_labels: None,
            graph_label: None,
            split: None,
        })
    }

    /// Graph from an undirected edge list. Edges are symmetrized and
    /// deduplicated; self-loops are dropped.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize)],
        features: Matrix,
    ) -> Result<Self, GraphError> {
        Self::new(adjacency_from_edges(n, edges)?, features)
    }

    pub fn with_node_labels(mut self, labels: Vec<i64>) -> Result<Self, GraphError> {
        if labels.len() != self.num_nodes() {
            return Err(GraphError::LabelCount {
                what: "node label list",
                len: labels.len(),
                nodes: self.num_nodes(),
            });
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn with_graph_label(mut self, label: usize) -> Self {
        self.graph_label = Some(label);
        self
    }

    pub fn with_split(mut self, split: Split) -> Result<Self, GraphError> {
        split.validate(self.num_nodes())?;
        self.split = Some(split);
        Ok(self)
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.n_rows()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes()).map(|i| self.adjacency.row_nnz(i)).collect()
    }

    /// Replaces the feature matrix, keeping one row per node.
    pub fn set_features(&mut self, features: Matrix) -> Result<(), GraphError> {
        if features.rows() != self.num_nodes() {
            return Err(GraphError::FeatureRows {
                features: features.rows(),
                nodes: self.num_nodes(),
            });
        }
        self.features = features;
        Ok(())
    }
}

fn check_adjacency(a: &SparseMatrix) -> Result<(), GraphError> {
    if !a.is_square() {
        return Err(GraphError::NotSquare {
            rows: a.n_rows(),
            cols: a.n_cols(),
        });
    }
    for (r, c, v) in a.iter() {
        if r == c {
            return Err(GraphError::SelfLoop(r));
        }
        if a.get(c, r) != v {
            return Err(GraphError::Asymmetric { row: r, col: c });
        }
    }
    Ok(())
}

/// Symmetric 0/1 adjacency from an edge list; duplicates collapse and
/// self-loops are dropped.
pub fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<SparseMatrix, GraphError> {
    let mut set = BTreeSet::new();
    for &(u, v) in edges {
        for w in [u, v] {
            if w >= n {
                return Err(GraphError::NodeOutOfRange { index: w, nodes: n });
            }
        }
        if u != v {
            set.insert((u, v));
            set.insert((v, u));
        }
    }
    Ok(SparseMatrix::from_triplets(
        n,
        n,
        set.into_iter().map(|(u, v)| (u, v, 1.0)),
    )?)
}

/// A labelled set of graphs for graph-level tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphCollection {
    graphs: Vec<AttributedGraph>,
    class_count: usize,
}

impl GraphCollection {
    /// Requires a graph label on every member, in `[0, class_count)`.
    pub fn new(graphs: Vec<AttributedGraph>, class_count: usize) -> Result<Self, GraphError> {
        for (index, g) in graphs.iter().enumerate() {
            let label = g.graph_label.ok_or(GraphError::MissingGraphLabel { index })?;
            if label >= class_count {
                return Err(GraphError::GraphLabelRange {
                    index,
                    label,
                    classes: class_count,
                });
            }
        }
        Ok(Self {
            graphs,
            class_count,
        })
    }

    pub fn graphs(&self) -> &[AttributedGraph] {
        &self.graphs
    }

    pub fn graphs_mut(&mut self) -> &mut [AttributedGraph] {
        &mut self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> Vec<usize> {
        self.graphs
            .iter()
            .map(|g| g.graph_label.unwrap_or_default())
            .collect()
    }

    /// Sorted distinct node labels across all graphs, if every graph has them.
    pub fn node_label_vocabulary(&self) -> Option<Vec<i64>> {
        let mut set = BTreeSet::new();
        for g in &self.graphs {
            set.extend(g.node_labels.as_ref()?.iter().copied());
        }
        Some(set.into_iter().collect())
    }

    /// Initializes features on every graph with the usual precedence: existing
    /// features are standardized with collection-wide statistics, otherwise
    /// node labels are one-hot encoded over the collection vocabulary,
    /// otherwise capped degree one-hots are used.
    pub fn init_features(&mut self, degree_cap: usize) -> Result<FeatureSource, GraphError> {
        let width = self.graphs.first().map_or(0, |g| g.features.cols());
        if width > 0 {
            for g in &self.graphs {
                if g.features.cols() != width {
                    return Err(GraphError::FeatureWidth(width, g.features.cols()));
                }
            }
            let refs: Vec<&Matrix> = self.graphs.iter().map(|g| &g.features).collect();
            let stacked = Matrix::vstack(&refs)?;
            let stats = ColumnStats::fit(&stacked);
            for g in &mut self.graphs {
                g.features = stats.apply(&g.features);
            }
            return Ok(FeatureSource::Standardized);
        }
        if let Some(vocabulary) = self.node_label_vocabulary() {
            let policy = FeaturePolicy::NodeLabelsOneHot { vocabulary };
            for g in &mut self.graphs {
                g.features = init_features(g, &policy)?;
            }
            return Ok(FeatureSource::NodeLabels);
        }
        let policy = FeaturePolicy::DegreesOneHot {
            max_degree: degree_cap,
        };
        for g in &mut self.graphs {
            g.features = init_features(g, &policy)?;
        }
        Ok(FeatureSource::Degrees)
    }
}

/// Which input the collection-level feature initialization used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureSource {
    Standardized,
    NodeLabels,
    Degrees,
}

/// Symmetric normalization with self-loops: `D̂^{-1/2} (A + I) D̂^{-1/2}`.
pub fn normalize_adjacency(a: &SparseMatrix) -> Result<SparseMatrix, GraphError> {
    check_adjacency(a)?;
    let n = a.n_rows();
    let with_loops = SparseMatrix::from_triplets(
        n,
        n,
        a.iter().chain((0..n).map(|i| (i, i, 1.0))),
    )?;
    let inv_sqrt: Vec<f64> = with_loops
        .row_sums()
        .into_iter()
        .map(|d| 1.0 / math::sqrt(d))
        .collect();
    Ok(with_loops.scale_rows_cols(&inv_sqrt, &inv_sqrt))
}

/// Node-induced subgraph. Kept nodes are re-indexed in sorted original order;
/// features, node labels and split membership follow the same selection.
pub fn induced_subgraph(g: &AttributedGraph, nodes: &[usize]) -> Result<AttributedGraph, GraphError> {
    let kept = sorted_sample(nodes, g.num_nodes())?;
    let adjacency = g.adjacency.submatrix(&kept)?;
    let features = g.features.select_rows(&kept);
    let node_labels = g
        .node_labels
        .as_ref()
        .map(|l| kept.iter().map(|&i| l[i]).collect());
    let split = g.split.as_ref().map(|s| {
        let mut new_index = vec![usize::MAX; g.num_nodes()];
        for (k, &v) in kept.iter().enumerate() {
            new_index[v] = k;
        }
        let remap = |ids: &[usize]| -> Vec<usize> {
            ids.iter()
                .filter(|&&i| new_index[i] != usize::MAX).map(|&i| new_index[i])
                .collect()
        };
        Split {
            train: remap(&s.train),
            val: remap(&s.val),
            test: remap(&s.test),
        }
    });
    Ok(AttributedGraph {
        adjacency,
        features,
        node_labels,
        graph_label: g.graph_label,
        split,
    })
}

/// Sorts and deduplicates a node selection, checking range and non-emptiness.
pub fn sorted_sample(nodes: &[usize], n: usize) -> Result<Vec<usize>, GraphError> {
    if nodes.is_empty() {
        return Err(GraphError::EmptySample);
    }
    let mut kept = nodes.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&max) = kept.last() {
        if max >= n {
            return Err(GraphError::NodeOutOfRange { index: max, nodes: n });
        }
    }
    Ok(kept)
}

/// How to derive node features.
#[derive(Clone, Debug, PartialEq)]
pub enum FeaturePolicy {
    /// Per-column standard score of the existing features.
    Standardize,
    /// One-hot over an explicit, sorted label vocabulary.
    NodeLabelsOneHot { vocabulary: Vec<i64> },
    /// One-hot of the node degree; degrees above `max_degree` share the last bucket.
    DegreesOneHot { max_degree: usize },
}

pub fn init_features(g: &AttributedGraph, policy: &FeaturePolicy) -> Result<Matrix, GraphError> {
    match policy {
        FeaturePolicy::Standardize => Ok(standardize(&g.features)),
        FeaturePolicy::NodeLabelsOneHot { vocabulary } => {
            let labels = g.node_labels.as_ref().ok_or(GraphError::MissingNodeLabels)?;
            let mut out = Matrix::zeros(labels.len(), vocabulary.len());
            for (i, &l) in labels.iter().enumerate() {
                let k = vocabulary
                    .binary_search(&l)
                    .map_err(|_| GraphError::UnknownNodeLabel(l))?;
                out[(i, k)] = 1.0;
            }
            Ok(out)
        }
        FeaturePolicy::DegreesOneHot { max_degree } => {
            let mut out = Matrix::zeros(g.num_nodes(), max_degree + 1);
            for (i, d) in g.degrees().into_iter().enumerate() {
                out[(i, d.min(*max_degree))] = 1.0;
            }
            Ok(out)
        }
    }
}

/// Column means and (population) standard deviations.
#[derive(Clone, Debug)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ColumnStats {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows().max(1) as f64;
        let mean: Vec<f64> = x.col_sums().into_iter().map(|s| s / n).collect();
        let mut var = vec![0.0; x.cols()];
        for r in x.iter_rows() {
            for ((v, &xv), &m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (xv - m) * (xv - m);
            }
        }
        let std = var.into_iter().map(|v| math::sqrt(v / n)).collect();
        Self { mean, std }
    }

    /// `(x - mean) / std`; columns with zero spread map to zero.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let s = self.std[j];
                *v = if s > 0.0 { (*v - self.mean[j]) / s } else { 0.0 };
            }
        }
        out
    }
}

pub fn standardize(x: &Matrix) -> Matrix {
    ColumnStats::fit(x).apply(x)
}
