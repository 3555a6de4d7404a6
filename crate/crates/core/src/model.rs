//! Per-view GCN encoders, projection heads, readout and discriminator.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng as _;
use thiserror::Error;

use crate::autodiff::{AutodiffError, NodeId, Tape};
use crate::linalg::{LinalgError, Matrix, SparseMatrix};
use crate::math;
use crate::rng::{self, Rng};

pub const DEFAULT_HIDDEN: usize = 512;
pub const PRELU_INIT: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model needs at least one GCN layer")]
    NoLayers,
    #[error("model needs between 1 and 3 views, got {0}")]
    ViewCount(usize),
    #[error("{what} must be positive")]
    ZeroDim { what: &'static str },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch members disagree on {what}: {expected} vs {found}")]
    BatchMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("encoder {index} requested but the model has {count}")]
    EncoderIndex { index: usize, count: usize },
    #[error("parameter {name}: expected shape {expected:?}, found {found:?}")]
    ParamShape {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("unexpected parameter {0}")]
    UnexpectedParam(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EncoderSharing {
    #[default]
    Dedicated,
    Shared,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DiscriminatorKind {
    #[default]
    Dot,
    Bilinear,
}

/// How node representations are pooled into a graph representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Pooling {
    #[default]
    Sum,
    Mean,
}

/// Which representation inference returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EmbeddingSource {
    /// Outputs of the projection heads.
    #[default]
    Projected,
    /// Last GCN layer for nodes and the readout for graphs.
    Encoder,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub in_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub views: usize,
    pub sharing: EncoderSharing,
    pub discriminator: DiscriminatorKind,
    pub pooling: Pooling,
}

impl ModelConfig {
    pub fn new(in_dim: usize, hidden: usize, layers: usize) -> Self {
        Self {
            in_dim,
            hidden,
            layers,
            views: 2,
            sharing: EncoderSharing::Dedicated,
            discriminator: DiscriminatorKind::Dot,
            pooling: Pooling::Sum,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layers == 0 {
            return Err(ModelError::NoLayers);
        }
        if !(1..=3).contains(&self.views) {
            return Err(ModelError::ViewCount(self.views));
        }
        if self.in_dim == 0 {
            return Err(ModelError::ZeroDim { what: "input width" });
        }
        if self.hidden == 0 {
            return Err(ModelError::ZeroDim { what: "hidden width" });
        }
        Ok(())
    }

    pub fn encoder_count(&self) -> usize {
        match self.sharing {
            EncoderSharing::Dedicated => self.views,
            EncoderSharing::Shared => 1,
        }
    }
}

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: String, value: Matrix) -> usize {
        self.names.push(name);
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Linear {
    weight: usize,
    bias: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Head {
    layers: [Linear; 3],
    slopes: [usize; 2],
}

#[derive(Clone, Debug, PartialEq)]
struct Layout {
    /// `(theta, slope)` per layer, per encoder.
    encoders: Vec<Vec<(usize, usize)>>,
    readout_weight: usize,
    readout_slope: usize,
    node_head: Head,
    graph_head: Head,
    bilinear: Option<usize>,
}

/// Glorot-uniform initialization in `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform(rng: &mut Rng, fan_in: usize, fan_out: usize) -> Matrix {
    let bound = xavier_bound(fan_in, fan_out);
    Matrix::from_fn(fan_in, fan_out, |_, _| rng.gen_range(-bound..=bound))
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    math::sqrt(6.0 / (fan_in + fan_out) as f64)
}

type ParamShapes = Vec<(String, (usize, usize))>;

/// Expected `(name, shape)` list for a configuration, in parameter order.
fn manifest(config: &ModelConfig) -> (ParamShapes, Layout) {
    let h = config.hidden;
    let mut entries: ParamShapes = Vec::new();
    let mut push = |name: String, shape: (usize, usize)| {
        entries.push((name, shape));
        entries.len() - 1
    };
    let encoders = (0..config.encoder_count())
        .map(|e| {
            (0..config.layers)
                .map(|l| {
                    let fan_in = if l == 0 { config.in_dim } else { h };
                    (
                        push(format!("encoder{e}.layer{l}.theta"), (fan_in, h)),
                        push(format!("encoder{e}.layer{l}.slope"), (1, 1)),
                    )
                })
                .collect()
        })
        .collect();
    let readout_weight = push("readout.weight".into(), (config.layers * h, h));
    let readout_slope = push("readout.slope".into(), (1, 1));
    let mut head = |prefix: &str| {
        let layers = [0, 1, 2].map(|i| Linear {
            weight: push(format!("{prefix}.linear{i}.weight"), (h, h)),
            bias: push(format!("{prefix}.linear{i}.bias"), (1, h)),
        });
        let slopes = [0, 1].map(|i| push(format!("{prefix}.slope{i}"), (1, 1)));
        Head { layers, slopes }
    };
    let node_head = head("node_head");
    let graph_head = head("graph_head");
    let bilinear = (config.discriminator == DiscriminatorKind::Bilinear)
        .then(|| push("discriminator.bilinear".into(), (h, h)));
    (
        entries,
        Layout {
            encoders,
            readout_weight,
            readout_slope,
            node_head,
            graph_head,
            bilinear,
        },
    )
}

/// Encoders, readout, projection heads and discriminator with their weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    layout: Layout,
    params: ParamSet,
}

/// Model parameters registered on a tape.
#[derive(Clone, Debug)]
pub struct BoundParams {
    nodes: Vec<NodeId>,
}

impl BoundParams {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }
}

/// Tape nodes of one encoded view.
#[derive(Clone, Debug)]
pub struct EncodingNodes {
    /// Per-layer activations `Z^(1..L)`.
    pub layers: Vec<NodeId>,
    /// Projected node representations.
    pub node: NodeId,
    /// Readout before projection, one row per graph.
    pub pooled: NodeId,
    /// Projected graph representations, one row per graph.
    pub graph: NodeId,
}

impl Model {
    /// Fresh model with Xavier-uniform weights, zero biases and PReLU slopes at 0.25.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let (entries, layout) = manifest(&config);
        let mut params = ParamSet::new();
        for (k, (name, (r, c))) in entries.into_iter().enumerate() {
            let value = if name.ends_with("slope") || name.contains(".slope") {
                Matrix::scalar(PRELU_INIT)
            } else if name.ends_with(".bias") {
                Matrix::zeros(r, c)
            } else {
                xavier_uniform(&mut rng::derive(seed, k as u64), r, c)
            };
            params.push(name, value);
        }
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    /// Rebuilds a model from stored parameters, checking names and shapes.
    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self, ModelError> {
        config.validate()?;
        let (entries, layout) = manifest(&config);
        for (name, _) in params.iter() {
            if !entries.iter().any(|(n, _)| n == name) {
                return Err(ModelError::UnexpectedParam(name.into()));
            }
        }
        let mut ordered = ParamSet::new();
        for (name, shape) in entries {
            let value = params
                .get(&name)
                .ok_or_else(|| ModelError::MissingParam(name.clone()))?;
            if value.shape() != shape {
                return Err(ModelError::ParamShape {
                    name,
                    expected: shape,
                    found: value.shape(),
                });
            }
            ordered.push(name, value.clone());
        }
        Ok(Self {
            config,
            layout,
            params: ordered,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }

    /// Encoder used for view `view`.
    pub fn encoder_for_view(&self, view: usize) -> usize {
        match self.config.sharing {
            EncoderSharing::Dedicated => view,
            EncoderSharing::Shared => 0,
        }
    }

    /// Registers every parameter on the tape, as differentiable leaves when
    /// `trainable`, else as constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundParams {
        let nodes = self
            .params
            .values()
            .iter()
            .map(|v| {
                if trainable {
                    tape.parameter(v.clone())
                } else {
                    tape.constant(v.clone())
                }
            })
            .collect();
        BoundParams { nodes }
    }

    /// Runs encoder `encoder` on `x` with message-passing operator `view`,
    /// then the readout over `pool` (graphs × nodes) and both heads.
    pub fn encode(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        encoder: usize,
        x: NodeId,
        view: &Arc<SparseMatrix>,
        pool: &Arc<SparseMatrix>,
    ) -> Result<EncodingNodes, ModelError> {
        let stack = self
            .layout
            .encoders
            .get(encoder)
            .ok_or(ModelError::EncoderIndex {
                index: encoder,
                count: self.layout.encoders.len(),
            })?;
        let p = |i: usize| bound.nodes[i];
        let mut layers = Vec::with_capacity(stack.len());
        let mut h = x;
        for &(theta, slope) in stack {
            h = gcn_layer(tape, h, view, p(theta), p(slope))?;
            layers.push(h);
        }
        let pooled = self.readout(tape, bound, &layers, pool)?;
        let node = self.head(tape, bound, &self.layout.node_head, *layers.last().expect("L >= 1"))?;
        let graph = self.head(tape, bound, &self.layout.graph_head, pooled)?;
        Ok(EncodingNodes {
            layers,
            node,
            pooled,
            graph,
        })
    }

    /// Graph readout: PReLU of the concatenated per-layer pooled sums times `W`.
    pub fn readout(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        layers: &[NodeId],
        pool: &Arc<SparseMatrix>,
    ) -> Result<NodeId, ModelError> {
        readout(
            tape,
            layers,
            pool,
            bound.nodes[self.layout.readout_weight],
            bound.nodes[self.layout.readout_slope],
        )
    }

    /// Projects node (or graph) representations through the node head.
    pub fn project_nodes(&self, tape: &mut Tape, bound: &BoundParams, x: NodeId) -> Result<NodeId, ModelError> {
        self.head(tape, bound, &self.layout.node_head, x)
    }

    fn head(&self, tape: &mut Tape, bound: &BoundParams, head: &Head, x: NodeId) -> Result<NodeId, ModelError> {
        let p = |i: usize| bound.nodes[i];
        let mut h = x;
        for (i, lin) in head.layers.iter().enumerate() {
            h = tape.matmul(h, p(lin.weight))?;
            h = tape.add_bias_row(h, p(lin.bias))?;
            if i < 2 {
                h = tape.prelu(h, p(head.slopes[i]))?;
            }
        }
        Ok(h)
    }

    /// Pairwise scores `D(a_i, b_j)`, an `r × c` node.
    pub fn discriminate(&self, tape: &mut Tape, bound: &BoundParams, a: NodeId, b: NodeId) -> Result<NodeId, ModelError> {
        let bt = tape.transpose(b)?;
        Ok(match self.layout.bilinear {
            Some(m) => {
                let am = tape.matmul(a, bound.nodes[m])?;
                tape.matmul(am, bt)?
            }
            None => tape.matmul(a, bt)?,
        })
    }

    /// Frozen-weight embeddings summed over all views of a batch.
    pub fn embed(&self, batch: &GraphBatch, source: EmbeddingSource) -> Result<Embeddings, ModelError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let x = tape.constant(batch.features.clone());
        let mut node = Matrix::zeros(batch.num_nodes(), self.config.hidden);
        let mut graph = Matrix::zeros(batch.num_graphs(), self.config.hidden);
        for (v, view) in batch.views.iter().enumerate() {
            let enc = self.encode(&mut tape, &bound, self.encoder_for_view(v), x, view, &batch.pool)?;
            let (n, g) = match source {
                EmbeddingSource::Projected => (enc.node, enc.graph),
                EmbeddingSource::Encoder => (*enc.layers.last().expect("L >= 1"), enc.pooled),
            };
            node.add_assign(tape.value(n))?;
            graph.add_assign(tape.value(g))?;
        }
        Ok(Embeddings { node, graph })
    }
}

/// Node and graph embeddings returned by inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub node: Matrix,
    pub graph: Matrix,
}

/// `PReLU(V · X · Θ)`, multiplying by the sparse view on the narrower side.
pub fn gcn_layer(
    tape: &mut Tape,
    x: NodeId,
    view: &Arc<SparseMatrix>,
    theta: NodeId,
    slope: NodeId,
) -> Result<NodeId, ModelError> {
    let (d_in, d_out) = tape.shape(theta);
    let lin = if d_in <= d_out {
        let vx = tape.spmm(view.clone(), x)?;
        tape.matmul(vx, theta)?
    } else {
        let xt = tape.matmul(x, theta)?;
        tape.spmm(view.clone(), xt)?
    };
    Ok(tape.prelu(lin, slope)?)
}

/// `PReLU(concat_l(pool · Z^l) · W)`.
pub fn readout(
    tape: &mut Tape,
    layers: &[NodeId],
    pool: &Arc<SparseMatrix>,
    weight: NodeId,
    slope: NodeId,
) -> Result<NodeId, ModelError> {
    let first = layers.first().ok_or(ModelError::NoLayers)?;
    let (n, d) = tape.shape(*first);
    let mut pooled = Vec::with_capacity(layers.len());
    for &z in layers {
        let shape = tape.shape(z);
        if shape != (n, d) {
            return Err(ModelError::BatchMismatch {
                what: "layer shape",
                expected: n * d,
                found: shape.0 * shape.1,
            });
        }
        pooled.push(tape.spmm(pool.clone(), z)?);
    }
    let cat = tape.concat_cols(&pooled)?;
    let lin = tape.matmul(cat, weight)?;
    Ok(tape.prelu(lin, slope)?)
}

/// Graphs × nodes pooling operator over a block-diagonal batch.
pub fn pooling_matrix(sizes: &[usize], pooling: Pooling) -> SparseMatrix {
    let total: usize = sizes.iter().sum();
    let mut triplets = Vec::with_capacity(total);
    let mut offset = 0;
    for (g, &n) in sizes.iter().enumerate() {
        let w = match pooling {
            Pooling::Sum => 1.0,
            Pooling::Mean => 1.0 / n as f64,
        };
        triplets.extend((offset..offset + n).map(|u| (g, u, w)));
        offset += n;
    }
    SparseMatrix::from_triplets(sizes.len(), total, triplets).expect("pooling indices in range")
}

/// Several graphs packed block-diagonally, with one operator per view.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub views: Vec<Arc<SparseMatrix>>,
    pub features: Matrix,
    pub pool: Arc<SparseMatrix>,
    pub sizes: Vec<usize>,
}

impl GraphBatch {
    /// Packs `(views, features)` members. Every member must carry the same
    /// number of views and the same feature width.
    pub fn new(members: &[(Vec<&SparseMatrix>, &Matrix)], pooling: Pooling) -> Result<Self, ModelError> {
        let (first_views, first_x) = members.first().ok_or(ModelError::EmptyBatch)?;
        let view_count = first_views.len();
        let width = first_x.cols();
        let mut sizes = Vec::with_capacity(members.len());
        for (views, x) in members {
            if views.len() != view_count {
                return Err(ModelError::BatchMismatch {
                    what: "view count",
                    expected: view_count,
                    found: views.len(),
                });
            }
            if x.cols() != width {
                return Err(ModelError::BatchMismatch {
                    what: "feature width",
                    expected: width,
                    found: x.cols(),
                });
            }
            for v in views {
                if v.n_rows() != x.rows() || v.n_cols() != x.rows() {
                    return Err(ModelError::BatchMismatch {
                        what: "view size",
                        expected: x.rows(),
                        found: v.n_rows(),
                    });
                }
            }
            sizes.push(x.rows());
        }
        let views = (0..view_count)
            .map(|k| {
                let blocks: Vec<&SparseMatrix> = members.iter().map(|(v, _)| v[k]).collect();
                Arc::new(SparseMatrix::block_diagonal(&blocks))
            })
            .collect();
        let xs: Vec<&Matrix> = members.iter().map(|(_, x)| *x).collect();
        let features = Matrix::vstack(&xs)?;
        let pool = Arc::new(pooling_matrix(&sizes, pooling));
        Ok(Self {
            views,
            features,
            pool,
            sizes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_graphs(&self) -> usize {
        self.sizes.len()
    }

    /// Graph index of every node row.
    pub fn graph_of_node(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &n)| core::iter::repeat_n(g, n))
            .collect()
    }
}

/// Sum of two or more per-view embeddings.
pub fn combine_views(parts: &[&Matrix]) -> Result<Matrix, ModelError> {
    let first = parts.first().ok_or(ModelError::EmptyBatch)?;
    let mut out = (*first).clone();
    for p in &parts[1..] {
        out.add_assign(p)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::graph::{adjacency_from_edges, normalize_adjacency};

    fn path_view() -> Arc<SparseMatrix> {
        Arc::new(normalize_adjacency(&adjacency_from_edges(2, &[(0, 1)]).unwrap()).unwrap())
    }

    #[test]
    fn gcn_layer_examples() {
        for (theta, expected) in [(2.0, 2.0), (-1.0, -0.25)] {
            let mut t = Tape::new();
            let x = t.constant(Matrix::filled(2, 1, 1.0));
            let th = t.constant(Matrix::scalar(theta));
            let s = t.constant(Matrix::scalar(0.25));
            let out = gcn_layer(&mut t, x, &path_view(), th, s).unwrap();
            assert!(t.value(out).max_abs_diff(&Matrix::filled(2, 1, expected)) < 1e-15);
        }
        let mut t = Tape::new();
        let x = t.constant(Matrix::zeros(2, 3));
        let th = t.constant(Matrix::filled(3, 4, 0.7));
        let s = t.constant(Matrix::scalar(0.25));
        let out = gcn_layer(&mut t, x, &path_view(), th, s).unwrap();
        assert_eq!(t.value(out), &Matrix::zeros(2, 4));
    }

    #[test]
    fn readout_examples() {
        let mut t = Tape::new();
        let z = t.constant(Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        let w = t.constant(Matrix::identity(2));
        let s = t.constant(Matrix::scalar(0.25));
        let sum = Arc::new(pooling_matrix(&[2], Pooling::Sum));
        let r = readout(&mut t, &[z], &sum, w, s).unwrap();
        assert_eq!(t.value(r), &Matrix::row_vector(&[4.0, 6.0]));
        let mean = Arc::new(pooling_matrix(&[2], Pooling::Mean));
        let r = readout(&mut t, &[z], &mean, w, s).unwrap();
        assert_eq!(t.value(r), &Matrix::row_vector(&[2.0, 3.0]));
        let zero = t.constant(Matrix::zeros(2, 2));
        let r = readout(&mut t, &[zero], &sum, w, s).unwrap();
        assert_eq!(t.value(r), &Matrix::zeros(1, 2));
    }

    #[test]
    fn readout_concatenates_layers() {
        let config = ModelConfig::new(3, 4, 2);
        let model = Model::new(config, 1).unwrap();
        assert_eq!(model.params().get("readout.weight").unwrap().shape(), (8, 4));
    }

    #[test]
    fn discriminator_examples() {
        let mut config = ModelConfig::new(2, 3, 1);
        let model = Model::new(config.clone(), 0).unwrap();
        let mut t = Tape::new();
        let bound = model.bind(&mut t, false);
        let a = t.constant(Matrix::row_vector(&[1.0, 0.0, 2.0]));
        let b = t.constant(Matrix::row_vector(&[2.0, 1.0, 1.0]));
        let s = model.discriminate(&mut t, &bound, a, b).unwrap();
        assert_eq!(t.value(s).item(), Some(4.0));
        let z = t.constant(Matrix::zeros(1, 3));
        let s = model.discriminate(&mut t, &bound, a, z).unwrap();
        assert_eq!(t.value(s).item(), Some(0.0));

        config.discriminator = DiscriminatorKind::Bilinear;
        let mut params = Model::new(config.clone(), 0).unwrap().into_params();
        let idx = params.names().iter().position(|n| n == "discriminator.bilinear").unwrap();
        params.values_mut()[idx] = Matrix::identity(3);
        let bilinear = Model::from_params(config, params).unwrap();
        let mut t = Tape::new();
        let bound = bilinear.bind(&mut t, false);
        let a = t.constant(Matrix::row_vector(&[1.0, 0.0, 2.0]));
        let b = t.constant(Matrix::row_vector(&[2.0, 1.0, 1.0]));
        let s = bilinear.discriminate(&mut t, &bound, a, b).unwrap();
        assert_eq!(t.value(s).item(), Some(4.0));
    }

    #[test]
    fn initialization_bounds_and_independence() {
        let config = ModelConfig::new(5, 7, 2);
        let model = Model::new(config, 3).unwrap();
        for (name, value) in model.params().iter() {
            if name.contains("slope") {
                assert_eq!(value.item(), Some(PRELU_INIT));
            } else if name.ends_with("bias") {
                assert_eq!(value.max_abs(), 0.0);
            } else {
                let bound = xavier_bound(value.rows(), value.cols());
                assert!(value.max_abs() <= bound, "{name}");
            }
        }
        let p = model.params();
        assert_ne!(p.get("encoder0.layer0.theta"), p.get("encoder1.layer0.theta"));
    }

    #[test]
    fn shared_encoders_alias_weights() {
        let mut config = ModelConfig::new(2, 3, 1);
        config.sharing = EncoderSharing::Shared;
        let model = Model::new(config, 0).unwrap();
        assert!(model.params().get("encoder1.layer0.theta").is_none());
        let a = adjacency_from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let v = normalize_adjacency(&a).unwrap();
        let x = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0], [2.0, -1.0]]);
        let batch = GraphBatch::new(&[(vec![&v, &v], &x)], Pooling::Sum).unwrap();
        let mut t = Tape::new();
        let bound = model.bind(&mut t, false);
        let xs = t.constant(batch.features.clone());
        let e0 = model.encode(&mut t, &bound, model.encoder_for_view(0), xs, &batch.views[0], &batch.pool).unwrap();
        let e1 = model.encode(&mut t, &bound, model.encoder_for_view(1), xs, &batch.views[1], &batch.pool).unwrap();
        assert_eq!(t.value(e0.node), t.value(e1.node));
        let emb = model.embed(&batch, EmbeddingSource::Projected).unwrap();
        assert!(emb.node.max_abs_diff(&t.value(e0.node).scale(2.0)) < 1e-15);
    }

    #[test]
    fn combine_views_cases() {
        let a = Matrix::from_rows(&[[1.0, 2.0]]);
        let z = Matrix::zeros(1, 2);
        assert_eq!(combine_views(&[&a, &a]).unwrap(), a.scale(2.0));
        assert_eq!(combine_views(&[&a, &z]).unwrap(), a);
    }

    #[test]
    fn from_params_rejects_bad_shapes() {
        let config = ModelConfig::new(2, 3, 1);
        let mut params = Model::new(config.clone(), 0).unwrap().into_params();
        params.values_mut()[0] = Matrix::zeros(1, 1);
        assert!(matches!(Model::from_params(config, params), Err(ModelError::ParamShape { .. })));
    }
}
