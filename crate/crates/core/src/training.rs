//! Adam, early stopping and the contrastive training loop.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use thiserror::Error;

use crate::autodiff::{AutodiffError, NodeId, Tape};
use crate::diffusion::{build_view, DiffusionCoefficients, DiffusionError, Sparsification, ViewKind, ViewSpec};
use crate::graph::{AttributedGraph, GraphCollection, GraphError};
use crate::linalg::{LinalgError, Matrix, SparseMatrix};
use crate::math;
use crate::model::{
    BoundParams, DiscriminatorKind, EmbeddingSource, Embeddings, EncoderSharing, GraphBatch, Model,
    ModelConfig, ModelError, ParamSet, Pooling,
};
use crate::objectives::{
    average_terms, corrupt_features, score_pair, ContrastMode, Estimator, EstimatorKind, MiTerm,
    ObjectiveError, ScoreLayout, ScorePooling, ViewOutputs,
};
use crate::rng::{self, Rng};

pub const DEFAULT_LR: f64 = 0.001;
pub const DEFAULT_PATIENCE: usize = 20;
pub const DEFAULT_SUBSAMPLE: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid configuration: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Config(Vec<ConfigIssue>),
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
    #[error("gradient count {grads} does not match parameter count {params}")]
    GradientCount { grads: usize, params: usize },
    #[error("loss diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        /// Parameters of the best epoch before divergence.
        checkpoint: Box<Model>,
    },
    #[error("graph collection is empty")]
    NoGraphs,
    #[error("graph-level training needs at least two graphs per batch")]
    BatchTooSmall,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One problem found by [`TrainConfig::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub field: &'static str,
    pub message: String,
}

impl core::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Bias-corrected Adam with per-parameter moments.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Matrix> = params
            .values()
            .iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Applies one update. Gradients are checked for finiteness before any
    /// parameter is touched.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Matrix], lr: f64) -> Result<(), TrainError> {
        if grads.len() != params.len() {
            return Err(TrainError::GradientCount {
                grads: grads.len(),
                params: params.len(),
            });
        }
        for (name, g) in params.names().iter().zip(grads) {
            if !g.is_finite() {
                return Err(TrainError::NonFiniteGradient(name.clone()));
            }
        }
        self.t += 1;
        let t = self.t as f64;
        let c1 = 1.0 - libm::pow(self.beta1, t);
        let c2 = 1.0 - libm::pow(self.beta2, t);
        for (k, (p, g)) in params.values_mut().iter_mut().zip(grads).enumerate() {
            let m = self.m[k].as_mut_slice();
            let v = self.v[k].as_mut_slice();
            for (((pv, &gv), mv), vv) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= lr * m_hat / (math::sqrt(v_hat) + self.eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops once `patience` epochs pass without a strict improvement.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.since_best = 0;
            return StopDecision::Improved;
        }
        self.since_best += 1;
        if self.since_best >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best_epoch.map(|e| (e, self.best))
    }
}

/// Every training hyperparameter. Field names double as configuration keys.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub views: Vec<ViewKind>,
    pub alpha: f64,
    pub t: f64,
    pub epsilon: Option<f64>,
    pub topk: Option<usize>,
    pub dense_cap: usize,
    pub mode: ContrastMode,
    pub estimator: EstimatorKind,
    pub temperature: f64,
    pub layers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    pub hidden: usize,
    pub seed: u64,
    pub subsample_nodes: usize,
    pub encoder_sharing: EncoderSharing,
    pub discriminator: DiscriminatorKind,
    pub readout: Pooling,
    pub score_pooling: ScorePooling,
    pub embedding: EmbeddingSource,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            views: alloc::vec![ViewKind::Adjacency, ViewKind::Ppr],
            alpha: crate::diffusion::DEFAULT_ALPHA,
            t: crate::diffusion::DEFAULT_HEAT_T,
            epsilon: None,
            topk: None,
            dense_cap: crate::diffusion::DEFAULT_DENSE_CAP,
            mode: ContrastMode::LocalGlobal,
            estimator: EstimatorKind::Jsd,
            temperature: crate::objectives::DEFAULT_TEMPERATURE,
            layers: 1,
            epochs: 100,
            batch_size: 1,
            lr: DEFAULT_LR,
            patience: DEFAULT_PATIENCE,
            hidden: crate::model::DEFAULT_HIDDEN,
            seed: 0,
            subsample_nodes: DEFAULT_SUBSAMPLE,
            encoder_sharing: EncoderSharing::Dedicated,
            discriminator: DiscriminatorKind::Dot,
            readout: Pooling::Sum,
            score_pooling: ScorePooling::default(),
            embedding: EmbeddingSource::Projected,
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let mut bad = |field: &'static str, message: String| issues.push(ConfigIssue { field, message });
        if !(1..=3).contains(&self.views.len()) {
            bad("views", format!("expected 1 to 3 views, got {}", self.views.len()));
        }
        if self.views.len() == 3 && !self.views.contains(&ViewKind::Adjacency) {
            bad("views", "three views need an adjacency view as the anchor".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bad("alpha", format!("must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            bad("t", format!("must be positive, got {}", self.t));
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                bad("epsilon", format!("must be non-negative, got {e}"));
            }
        }
        if self.topk == Some(0) {
            bad("topk", "must be at least 1".into());
        }
        if self.epsilon.is_some() && self.topk.is_some() {
            bad("topk", "epsilon and topk cannot both be set".into());
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            bad("temperature", format!("must be positive, got {}", self.temperature));
        }
        for (field, v) in [
            ("layers", self.layers),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("hidden", self.hidden),
            ("subsample_nodes", self.subsample_nodes),
            ("dense_cap", self.dense_cap),
        ] {
            if v == 0 {
                bad(field, "must be at least 1".into());
            }
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            bad("lr", format!("must be a non-negative number, got {}", self.lr));
        }
        issues
    }

    pub fn estimator(&self) -> Estimator {
        Estimator::with_temperature(self.estimator, self.temperature)
    }

    pub fn sparsification(&self) -> Sparsification {
        match (self.epsilon, self.topk) {
            (Some(e), _) => Sparsification::Epsilon(e),
            (None, Some(k)) => Sparsification::TopK(k),
            (None, None) => Sparsification::None,
        }
    }

    pub fn view_specs(&self) -> Vec<ViewSpec> {
        self.views
            .iter()
            .map(|&view| {
                let coefficients = match view {
                    ViewKind::Heat => DiffusionCoefficients::heat(self.t),
                    _ => DiffusionCoefficients::ppr(self.alpha),
                };
                let sparsification = match view {
                    ViewKind::Adjacency => Sparsification::None,
                    _ => self.sparsification(),
                };
                ViewSpec {
                    view,
                    coefficients,
                    sparsification,
                    dense_cap: self.dense_cap,
                }
            })
            .collect()
    }

    pub fn model_config(&self, in_dim: usize) -> ModelConfig {
        ModelConfig {
            in_dim,
            hidden: self.hidden,
            layers: self.layers,
            views: self.views.len(),
            sharing: self.encoder_sharing,
            discriminator: self.discriminator,
            pooling: self.readout,
        }
    }

    /// View pairs contrasted by the loss: the single pair for two views, the
    /// adjacency anchor against each other view for three, and a view with
    /// itself for one.
    pub fn view_pairs(&self) -> Vec<(usize, usize)> {
        match self.views.len() {
            1 => alloc::vec![(0, 0)],
            2 => alloc::vec![(0, 1)],
            _ => {
                let anchor = self
                    .views
                    .iter()
                    .position(|&v| v == ViewKind::Adjacency)
                    .unwrap_or(0);
                (0..self.views.len())
                    .filter(|&v| v != anchor)
                    .map(|v| (anchor, v))
                    .collect()
            }
        }
    }

    fn check(&self) -> Result<(), TrainError> {
        let issues = self.validate();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(TrainError::Config(issues))
        }
    }
}

/// Views of one graph, in configured order, plus warnings about duplicates.
pub fn make_views(g: &AttributedGraph, specs: &[ViewSpec]) -> Result<(Vec<SparseMatrix>, Vec<String>), TrainError> {
    let mut warnings = Vec::new();
    for (i, a) in specs.iter().enumerate() {
        if specs[..i].contains(a) {
            warnings.push(format!("view {i} ({}) duplicates an earlier view", a.view));
        }
    }
    let views = specs
        .iter()
        .map(|s| build_view(g.adjacency(), s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((views, warnings))
}

/// Everything the objective needs for one optimization step.
#[derive(Clone, Debug)]
pub struct StepBatch {
    pub batch: GraphBatch,
    /// Row-permuted features for corruption negatives.
    pub corrupted: Option<Matrix>,
}

/// How the loss of a step is assembled.
#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    pub mode: ContrastMode,
    pub estimator: Estimator,
    pub score_pooling: ScorePooling,
    pub pairs: Vec<(usize, usize)>,
}

impl ObjectiveSpec {
    pub fn from_config(cfg: &TrainConfig) -> Self {
        Self {
            mode: cfg.mode,
            estimator: cfg.estimator(),
            score_pooling: cfg.score_pooling,
            pairs: cfg.view_pairs(),
        }
    }
}

/// Records the full contrastive loss of one step on `tape`.
pub fn step_objective(
    tape: &mut Tape,
    model: &Model,
    bound: &BoundParams,
    step: &StepBatch,
    spec: &ObjectiveSpec,
) -> Result<MiTerm, TrainError> {
    let batch = &step.batch;
    let x = tape.constant(batch.features.clone());
    let xc = step.corrupted.as_ref().map(|c| tape.constant(c.clone()));
    let mut outputs: Vec<ViewOutputs> = Vec::with_capacity(batch.views.len());
    for (v, view) in batch.views.iter().enumerate() {
        let encoder = model.encoder_for_view(v);
        let enc = model.encode(tape, bound, encoder, x, view, &batch.pool)?;
        let corrupted = match xc {
            Some(xc) => {
                let c = model.encode(tape, bound, encoder, xc, view, &batch.pool)?;
                Some((c.node, c.graph))
            }
            None => None,
        };
        outputs.push(ViewOutputs {
            node: enc.node,
            graph: enc.graph,
            corrupted,
        });
    }
    let layout = ScoreLayout::new(&batch.sizes, spec.score_pooling);
    let mut terms = Vec::with_capacity(spec.pairs.len());
    for &(a, b) in &spec.pairs {
        let (sa, sb) = score_pair(
            tape,
            model,
            bound,
            &outputs[a],
            &outputs[b],
            spec.mode,
            &spec.estimator,
            &layout,
        )?;
        let ta = crate::objectives::mi_objective(tape, &sa, &spec.estimator)?;
        let tb = crate::objectives::mi_objective(tape, &sb, &spec.estimator)?;
        terms.push(average_terms(tape, &[ta, tb])?);
    }
    Ok(average_terms(tape, &terms)?)
}

/// Loss, MI estimate and parameter gradients for one step.
pub fn loss_and_gradients(
    model: &Model,
    step: &StepBatch,
    spec: &ObjectiveSpec,
) -> Result<(f64, f64, Vec<Matrix>), TrainError> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, true);
    let term = step_objective(&mut tape, model, &bound, step, spec)?;
    let loss = tape.value(term.loss).as_slice()[0];
    let mi = tape.value(term.mi).as_slice()[0];
    let mut grads = tape.backward(term.loss)?;
    let g = bound
        .nodes()
        .iter()
        .zip(model.params().values())
        .map(|(&id, p): (&NodeId, &Matrix)| grads.take(id).unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols())))
        .collect();
    Ok((loss, mi, g))
}

/// Training input: a labelled graph collection or a single graph.
#[derive(Clone, Copy, Debug)]
pub enum TrainData<'a> {
    Graphs(&'a GraphCollection),
    Transductive(&'a AttributedGraph),
}

/// Loss statistics of one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub mi: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    /// Parameters of the epoch with the lowest loss.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub embeddings: Embeddings,
    pub warnings: Vec<String>,
}

/// Node subset shared by every view of one transductive sub-sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSample {
    pub nodes: Vec<usize>,
}

impl NodeSample {
    /// A uniformly random subset of `size` nodes (all nodes when `size >= n`),
    /// in ascending order.
    pub fn draw(n: usize, size: usize, rng: &mut Rng) -> Self {
        let mut nodes = if size >= n {
            (0..n).collect()
        } else {
            index::sample(rng, n, size).into_vec()
        };
        nodes.sort_unstable();
        Self { nodes }
    }

    /// Restricts every view to the sample; all views see the same node set.
    pub fn views(&self, views: &[SparseMatrix]) -> Result<Vec<SparseMatrix>, LinalgError> {
        views.iter().map(|v| v.submatrix(&self.nodes)).collect()
    }
}

struct Prepared {
    /// Per graph: its views and features.
    graphs: Vec<(Vec<SparseMatrix>, Matrix)>,
    transductive: bool,
}

fn prepare(data: TrainData<'_>, cfg: &TrainConfig, warnings: &mut Vec<String>) -> Result<Prepared, TrainError> {
    let specs = cfg.view_specs();
    let mut build = |g: &AttributedGraph| -> Result<(Vec<SparseMatrix>, Matrix), TrainError> {
        let (views, w) = make_views(g, &specs)?;
        if warnings.is_empty() {
            warnings.extend(w);
        }
        Ok((views, g.features.clone()))
    };
    match data {
        TrainData::Graphs(c) => {
            if c.is_empty() {
                return Err(TrainError::NoGraphs);
            }
            let graphs = c.graphs().iter().map(&mut build).collect::<Result<_, _>>()?;
            Ok(Prepared {
                graphs,
                transductive: false,
            })
        }
        TrainData::Transductive(g) => Ok(Prepared {
            graphs: alloc::vec![build(g)?],
            transductive: true,
        }),
    }
}

fn graph_batch(members: &[(Vec<SparseMatrix>, Matrix)], pooling: Pooling) -> Result<GraphBatch, TrainError> {
    let refs: Vec<(Vec<&SparseMatrix>, &Matrix)> =
        members.iter().map(|(v, x)| (v.iter().collect(), x)).collect();
    Ok(GraphBatch::new(&refs, pooling)?)
}

/// Steps of one epoch.
fn epoch_steps(prep: &Prepared, cfg: &TrainConfig, rng: &mut Rng) -> Result<Vec<StepBatch>, TrainError> {
    if prep.transductive {
        let (views, x) = &prep.graphs[0];
        let n = x.rows();
        let samples = n.div_ceil(cfg.subsample_nodes);
        let mut members = Vec::with_capacity(samples);
        let mut corrupted = Vec::with_capacity(samples);
        for _ in 0..samples {
            let sample = NodeSample::draw(n, cfg.subsample_nodes, rng);
            let xs = x.select_rows(&sample.nodes);
            corrupted.push(corrupt_features(&xs, rng).0);
            members.push((sample.views(views)?, xs));
        }
        let mut steps = Vec::new();
        for (chunk, bad) in members.chunks(cfg.batch_size).zip(corrupted.chunks(cfg.batch_size)) {
            let refs: Vec<&Matrix> = bad.iter().collect();
            steps.push(StepBatch {
                batch: graph_batch(chunk, cfg.readout)?,
                corrupted: Some(Matrix::vstack(&refs)?),
            });
        }
        return Ok(steps);
    }
    let m = prep.graphs.len();
    if m < 2 {
        return Err(TrainError::BatchTooSmall);
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut chunks: Vec<Vec<usize>> = order.chunks(cfg.batch_size.max(2)).map(<[usize]>::to_vec).collect();
    if chunks.len() > 1 && chunks.last().is_some_and(|c| c.len() == 1) {
        let last = chunks.pop().expect("non-empty");
        chunks.last_mut().expect("non-empty").extend(last);
    }
    chunks
        .into_iter()
        .map(|idx| {
            let members: Vec<(Vec<SparseMatrix>, Matrix)> =
                idx.iter().map(|&i| prep.graphs[i].clone()).collect();
            Ok(StepBatch {
                batch: graph_batch(&members, cfg.readout)?,
                corrupted: None,
            })
        })
        .collect()
}

/// Trains from scratch; see [`train_with`].
pub fn train(data: TrainData<'_>, cfg: &TrainConfig) -> Result<TrainOutput, TrainError> {
    train_with(data, cfg, |_| {})
}

/// Trains with Adam and early stopping on the epoch loss, calling `observer`
/// after every epoch. The returned model is the best-loss checkpoint.
pub fn train_with(
    data: TrainData<'_>,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<TrainOutput, TrainError> {
    cfg.check()?;
    let mut warnings = Vec::new();
    let prep = prepare(data, cfg, &mut warnings)?;
    let in_dim = prep.graphs[0].1.cols();
    let mut model = Model::new(cfg.model_config(in_dim), cfg.seed)?;
    let mut adam = AdamState::new(model.params());
    let spec = ObjectiveSpec::from_config(cfg);
    let mut rng = rng::derive(cfg.seed, 1);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut stopped_early = false;
    for epoch in 0..cfg.epochs {
        let steps = epoch_steps(&prep, cfg, &mut rng)?;
        let (mut loss_sum, mut mi_sum) = (0.0, 0.0);
        for step in &steps {
            let (loss, mi, grads) = loss_and_gradients(&model, step, &spec)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    checkpoint: Box::new(best),
                });
            }
            adam.step(model.params_mut(), &grads, cfg.lr)?;
            loss_sum += loss;
            mi_sum += mi;
        }
        let count = steps.len().max(1) as f64;
        let record = EpochRecord {
            epoch,
            loss: loss_sum / count,
            mi: mi_sum / count,
        };
        history.push(record);
        observer(&record);
        match stopper.observe(epoch, record.loss) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = true;
                break;
            }
        }
    }
    let best_epoch = stopper.best().map_or(0, |(e, _)| e);
    let embeddings = embed_prepared(&best, &prep, cfg.readout, cfg.embedding)?;
    Ok(TrainOutput {
        model: best,
        history,
        best_epoch,
        stopped_early,
        embeddings,
        warnings,
    })
}

/// Graphs embedded per inference batch.
const EMBED_CHUNK: usize = 256;

fn embed_prepared(
    model: &Model,
    prep: &Prepared,
    pooling: Pooling,
    source: EmbeddingSource,
) -> Result<Embeddings, TrainError> {
    let mut nodes = Vec::new();
    let mut graphs = Vec::new();
    for chunk in prep.graphs.chunks(EMBED_CHUNK) {
        let e = model.embed(&graph_batch(chunk, pooling)?, source)?;
        nodes.push(e.node);
        graphs.push(e.graph);
    }
    let node_refs: Vec<&Matrix> = nodes.iter().collect();
    let graph_refs: Vec<&Matrix> = graphs.iter().collect();
    Ok(Embeddings {
        node: Matrix::vstack(&node_refs)?,
        graph: Matrix::vstack(&graph_refs)?,
    })
}

/// Embeds data with a trained model, rebuilding the configured views.
pub fn embed(model: &Model, data: TrainData<'_>, cfg: &TrainConfig) -> Result<Embeddings, TrainError> {
    cfg.check()?;
    let prep = prepare(data, cfg, &mut Vec::new())?;
    embed_prepared(model, &prep, cfg.readout, cfg.embedding)
}

/// A single-graph step without corruption (for batches of several graphs)
/// or with a seeded corruption (for one graph), for gradient checks.
pub fn single_step(
    members: &[(Vec<SparseMatrix>, Matrix)],
    pooling: Pooling,
    corruption_seed: Option<u64>,
) -> Result<StepBatch, TrainError> {
    let batch = graph_batch(members, pooling)?;
    let corrupted = corruption_seed.map(|s| {
        let mut rng = rng::seeded(s);
        let parts: Vec<Matrix> = members.iter().map(|(_, x)| corrupt_features(x, &mut rng).0).collect();
        let refs: Vec<&Matrix> = parts.iter().collect();
        Matrix::vstack(&refs)
    });
    Ok(StepBatch {
        batch,
        corrupted: corrupted.transpose()?,
    })
}

/// Runs `finite_difference_check` on the full step objective with the model
/// parameters as leaves.
pub fn end_to_end_gradcheck(model: &Model, step: &StepBatch, spec: &ObjectiveSpec, eps: f64, seed: u64) -> Result<f64, TrainError> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, true);
    let term = step_objective(&mut tape, model, &bound, step, spec)?;
    Ok(crate::autodiff::finite_difference_check(&mut tape, term.loss, eps, seed)?)
}


/// Finite-difference step for end-to-end checks.
pub const GRADCHECK_EPS: f64 = 1e-3;

/// Smallest PReLU input magnitude accepted for an end-to-end check instance.
pub const KINK_MARGIN: f64 = 1e-2;

/// Redraws allowed while searching for an instance clear of PReLU kinks.
const MAX_DRAWS: u64 = 10_000;

/// Batch of two random connected 4-node graphs with adjacency and PPR views
/// and a Xavier-initialized model with random biases and slopes, checked end
/// to end by finite differences.
/// Instances with a PReLU input closer than [`KINK_MARGIN`] to zero are
/// redrawn from the next stream.
pub fn gradcheck_instance(
    seed: u64,
    estimator: EstimatorKind,
    mode: ContrastMode,
    layers: usize,
    eps: f64,
) -> Result<f64, TrainError> {
    let spec = ObjectiveSpec {
        mode,
        estimator: Estimator::new(estimator),
        score_pooling: ScorePooling::default(),
        pairs: alloc::vec![(0, 1)],
    };
    let mut draw = 0;
    loop {
        let (model, step) = random_instance(seed, draw, layers)?;
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape, true);
        let term = step_objective(&mut tape, &model, &bound, &step, &spec)?;
        if tape.kink_margin() >= KINK_MARGIN || draw + 1 == MAX_DRAWS {
            return Ok(crate::autodiff::finite_difference_check(&mut tape, term.loss, eps, seed)?);
        }
        draw += 1;
    }
}

fn random_instance(seed: u64, draw: u64, layers: usize) -> Result<(Model, StepBatch), TrainError> {
    use rand::Rng as _;
    const N: usize = 4;
    const IN_DIM: usize = 3;
    const HIDDEN: usize = 4;
    let stream = seed.wrapping_mul(MAX_DRAWS).wrapping_add(draw);
    let mut rng = rng::derive(stream, 0x9c);
    let specs = [ViewSpec::adjacency(), ViewSpec::ppr(crate::diffusion::DEFAULT_ALPHA)];
    let mut members = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut edges: Vec<(usize, usize)> = (1..N).map(|i| (i - 1, i)).collect();
        for i in 0..N {
            for j in i + 2..N {
                if rng.gen_bool(0.4) {
                    edges.push((i, j));
                }
            }
        }
        let x = Matrix::from_fn(N, IN_DIM, |_, _| {
            let m = rng.gen_range(0.1..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        });
        let g = AttributedGraph::from_edges(N, &edges, x)?;
        let (views, _) = make_views(&g, &specs)?;
        members.push((views, g.features.clone()));
    }
    let step = single_step(&members, Pooling::Sum, None)?;
    let config = ModelConfig {
        views: 2,
        ..ModelConfig::new(IN_DIM, HIDDEN, layers)
    };
    let mut model = Model::new(config, stream)?;
    let names: Vec<String> = model.params().names().to_vec();
    for (name, value) in names.iter().zip(model.params_mut().values_mut()) {
        if name.ends_with(".bias") {
            *value = Matrix::from_fn(value.rows(), value.cols(), |_, _| rng.gen_range(-0.5..0.5));
        } else if name.contains("slope") {
            *value = Matrix::scalar(rng.gen_range(0.1..0.5));
        }
    }
    Ok((model, step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphCollection;
    use alloc::vec;

    #[test]
    fn adam_first_step() {
        let mut params = ParamSet::new();
        params.push("w".into(), Matrix::scalar(0.0));
        let mut adam = AdamState::new(&params);
        adam.step(&mut params, &[Matrix::scalar(1.0)], 0.001).unwrap();
        let delta = params.values()[0].item().unwrap();
        assert!((delta + 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn adam_zero_gradient_and_zero_lr() {
        let mut params = ParamSet::new();
        params.push("w".into(), Matrix::row_vector(&[0.3, -0.2]));
        let before = params.clone();
        let mut adam = AdamState::new(&params);
        adam.step(&mut params, &[Matrix::zeros(1, 2)], 0.001).unwrap();
        assert_eq!(params, before);
        adam.step(&mut params, &[Matrix::row_vector(&[1.0, 2.0])], 0.0).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn adam_constant_gradient_is_monotone() {
        let mut params = ParamSet::new();
        params.push("w".into(), Matrix::scalar(1.0));
        let mut adam = AdamState::new(&params);
        let g = [Matrix::scalar(0.5)];
        adam.step(&mut params, &g, 0.01).unwrap();
        let a = params.values()[0].item().unwrap();
        adam.step(&mut params, &g, 0.01).unwrap();
        let b = params.values()[0].item().unwrap();
        assert!(a < 1.0 && b < a);
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut params = ParamSet::new();
        params.push("encoder0.layer0.theta".into(), Matrix::scalar(1.0));
        let mut adam = AdamState::new(&params);
        match adam.step(&mut params, &[Matrix::scalar(f64::NAN)], 0.1) {
            Err(TrainError::NonFiniteGradient(name)) => assert_eq!(name, "encoder0.layer0.theta"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(params.values()[0].item(), Some(1.0));
    }

    #[test]
    fn early_stopping_on_plateau() {
        let mut s = EarlyStopping::new(20);
        let losses = [5.0, 4.0, 3.0];
        let mut stop_at = None;
        for epoch in 0..100 {
            let loss = losses.get(epoch).copied().unwrap_or(3.0);
            if s.observe(epoch, loss) == StopDecision::Stop {
                stop_at = Some(epoch);
                break;
            }
        }
        assert_eq!(s.best(), Some((2, 3.0)));
        assert_eq!(stop_at, Some(22));
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        for kind in [EstimatorKind::Jsd, EstimatorKind::NtXent, EstimatorKind::Dv] {
            for layers in [1, 2] {
                for seed in 0..5 {
                    let err = gradcheck_instance(seed, kind, ContrastMode::LocalGlobal, layers, GRADCHECK_EPS).unwrap();
                    assert!(err <= 1e-5, "{kind:?} L={layers} seed {seed}: {err}");
                }
            }
        }
    }

    #[test]
    fn lr_zero_step_keeps_parameters() {
        let g = two_triangles();
        let (views, _) = make_views(&g, &[ViewSpec::adjacency(), ViewSpec::ppr(0.2)]).unwrap();
        let step = single_step(&[(views, g.features.clone())], Pooling::Sum, Some(3)).unwrap();
        let cfg = TrainConfig { hidden: 4, ..TrainConfig::default() };
        let mut model = Model::new(cfg.model_config(3), 0).unwrap();
        let before = model.params().clone();
        let (_, _, grads) = loss_and_gradients(&model, &step, &ObjectiveSpec::from_config(&cfg)).unwrap();
        let mut adam = AdamState::new(model.params());
        adam.step(model.params_mut(), &grads, 0.0).unwrap();
        assert_eq!(model.params(), &before);
    }

    #[test]
    fn samples_share_nodes_across_views() {
        let g = two_triangles();
        let (views, _) = make_views(&g, &[ViewSpec::adjacency(), ViewSpec::ppr(0.2)]).unwrap();
        let mut rng = rng::seeded(4);
        let s = NodeSample::draw(6, 4, &mut rng);
        assert!(s.nodes.windows(2).all(|w| w[0] < w[1]));
        let sub = s.views(&views).unwrap();
        for (v, full) in sub.iter().zip(&views) {
            assert_eq!(v.shape(), (4, 4));
            for (r, &i) in s.nodes.iter().enumerate() {
                for (c, &j) in s.nodes.iter().enumerate() {
                    assert_eq!(v.get(r, c), full.get(i, j));
                }
            }
        }
    }

    #[test]
    fn duplicate_views_warn() {
        let g = two_triangles();
        let (views, warnings) = make_views(&g, &[ViewSpec::ppr(0.2), ViewSpec::ppr(0.2)]).unwrap();
        assert_eq!(views.len(), 2);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn validation_lists_every_issue() {
        let cfg = TrainConfig {
            epochs: 0,
            batch_size: 0,
            alpha: 1.5,
            views: vec![],
            ..TrainConfig::default()
        };
        let fields: Vec<&str> = cfg.validate().iter().map(|i| i.field).collect();
        for f in ["epochs", "batch_size", "alpha", "views"] {
            assert!(fields.contains(&f), "{f} missing from {fields:?}");
        }
    }

    #[test]
    fn view_pairs_anchor_on_adjacency() {
        let cfg = TrainConfig {
            views: vec![ViewKind::Ppr, ViewKind::Adjacency, ViewKind::Heat],
            ..TrainConfig::default()
        };
        assert_eq!(cfg.view_pairs(), vec![(1, 0), (1, 2)]);
    }

    fn two_triangles() -> AttributedGraph {
        let x = Matrix::from_rows(&[
            [1.0, 0.0, 0.2],
            [0.9, 0.1, 0.0],
            [1.0, 0.2, 0.1],
            [0.0, 1.0, 0.8],
            [0.1, 0.9, 1.0],
            [0.2, 1.0, 0.9],
        ]);
        AttributedGraph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)], x).unwrap()
    }

    #[test]
    fn toy_training_reduces_loss() {
        let g = two_triangles();
        let cfg = TrainConfig {
            hidden: 8,
            epochs: 50,
            patience: 100,
            lr: 0.01,
            ..TrainConfig::default()
        };
        let out = train(TrainData::Transductive(&g), &cfg).unwrap();
        let first = out.history.first().unwrap().loss;
        let best = out.history.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min);
        assert!(best < first, "{first} -> {best}");
        assert_eq!(out.embeddings.node.shape(), (6, 8));
    }

    #[test]
    fn training_is_deterministic() {
        let g = two_triangles();
        let cfg = TrainConfig {
            hidden: 4,
            epochs: 5,
            ..TrainConfig::default()
        };
        let a = train(TrainData::Transductive(&g), &cfg).unwrap();
        let b = train(TrainData::Transductive(&g), &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.embeddings, b.embeddings);
    }

    #[test]
    fn graph_level_training_runs() {
        let graphs: Vec<AttributedGraph> = (0..5)
            .map(|k| {
                let n = 3 + k % 3;
                let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
                AttributedGraph::from_edges(n, &edges, Matrix::filled(n, 2, 1.0 + k as f64 * 0.1))
                    .unwrap()
                    .with_graph_label(k % 2)
            })
            .collect();
        let c = GraphCollection::new(graphs, 2).unwrap();
        let cfg = TrainConfig {
            hidden: 4,
            layers: 2,
            epochs: 3,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let out = train(TrainData::Graphs(&c), &cfg).unwrap();
        assert_eq!(out.embeddings.graph.shape(), (5, 4));
        assert_eq!(out.history.len(), 3);
    }
}
