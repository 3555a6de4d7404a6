//! Contrastive score matrices, mutual-information estimators and feature
//! corruption.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::autodiff::{AutodiffError, NodeId, Tape};
use crate::linalg::{Matrix, SparseMatrix};
use crate::math;
use crate::model::{BoundParams, Model, ModelError};
use crate::rng::Rng;

pub const DEFAULT_TEMPERATURE: f64 = 0.5;

/// Added to excluded entries before a log-sum-exp so they carry no mass.
const MASKED: f64 = -1e30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("score matrix has no positive entries")]
    NoPositives,
    #[error("score matrix has no negative entries")]
    NoNegatives,
    #[error("score matrix contains a non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("mask is {mask:?} but scores are {scores:?}")]
    MaskShape {
        mask: (usize, usize),
        scores: (usize, usize),
    },
    #[error("a batch of one graph has no negatives without corruption")]
    SingleGraph,
    #[error("temperature must be finite and positive, got {0}")]
    Temperature(f64),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EstimatorKind {
    Jsd,
    Nce,
    #[cfg_attr(feature = "serde", serde(rename = "ntxent", alias = "nt_xent"))]
    NtXent,
    Dv,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Jsd,
        EstimatorKind::Nce,
        EstimatorKind::NtXent,
        EstimatorKind::Dv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Jsd => "jsd",
            EstimatorKind::Nce => "nce",
            EstimatorKind::NtXent => "ntxent",
            EstimatorKind::Dv => "dv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An estimator together with its temperature (used by NT-Xent only).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimator {
    pub kind: EstimatorKind,
    pub temperature: f64,
}

impl Estimator {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            temperature: DEFAULT_TEMPERATURE,
        }
    }

    pub fn with_temperature(kind: EstimatorKind, temperature: f64) -> Self {
        Self { kind, temperature }
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if self.temperature.is_finite() && self.temperature > 0.0 {
            Ok(())
        } else {
            Err(ObjectiveError::Temperature(self.temperature))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ContrastMode {
    #[default]
    LocalGlobal,
    GlobalGlobal,
    Ensemble,
}

impl ContrastMode {
    pub const ALL: [ContrastMode; 3] = [
        ContrastMode::LocalGlobal,
        ContrastMode::GlobalGlobal,
        ContrastMode::Ensemble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ContrastMode::LocalGlobal => "local_global",
            ContrastMode::GlobalGlobal => "global_global",
            ContrastMode::Ensemble => "ensemble",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// How node-versus-graph scores are arranged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScorePooling {
    /// One score per (graph, graph) pair: node scores averaged over the
    /// nodes of the row graph.
    #[default]
    GraphMean,
    /// One score per (node, graph) pair; a node's own graph is its positive.
    PerNode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskState {
    Positive,
    Negative,
    Ignored,
}

/// Along which axis InfoNCE groups a positive with its negatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupAxis {
    Rows,
    Cols,
}

/// Roles of the entries of a score matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMask {
    rows: usize,
    cols: usize,
    states: Vec<MaskState>,
    pub axis: GroupAxis,
}

impl ScoreMask {
    pub fn new(rows: usize, cols: usize, axis: GroupAxis, f: impl Fn(usize, usize) -> MaskState) -> Self {
        let states = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self {
            rows,
            cols,
            states,
            axis,
        }
    }

    /// Positives on the diagonal, negatives elsewhere.
    pub fn diagonal(n: usize) -> Self {
        Self::new(n, n, GroupAxis::Rows, |i, j| {
            if i == j {
                MaskState::Positive
            } else {
                MaskState::Negative
            }
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> MaskState {
        self.states[i * self.cols + j]
    }

    pub fn count(&self, state: MaskState) -> usize {
        self.states.iter().filter(|&&s| s == state).count()
    }

    fn indicator(&self, state: MaskState, weight: f64) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            if self.get(i, j) == state {
                weight
            } else {
                0.0
            }
        })
    }

    /// Zero on negatives, a large negative number elsewhere.
    fn negative_bias(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            if self.get(i, j) == MaskState::Negative {
                0.0
            } else {
                MASKED
            }
        })
    }

    pub fn transpose(&self) -> Self {
        let axis = match self.axis {
            GroupAxis::Rows => GroupAxis::Cols,
            GroupAxis::Cols => GroupAxis::Rows,
        };
        Self::new(self.cols, self.rows, axis, |i, j| self.get(j, i))
    }

    /// Mean number of negatives sharing a group with each positive.
    fn negatives_per_positive(&self) -> f64 {
        let mut total = 0usize;
        let mut positives = 0usize;
        let groups = match self.axis {
            GroupAxis::Rows => self.rows,
            GroupAxis::Cols => self.cols,
        };
        let len = match self.axis {
            GroupAxis::Rows => self.cols,
            GroupAxis::Cols => self.rows,
        };
        for g in 0..groups {
            let at = |k: usize| match self.axis {
                GroupAxis::Rows => self.get(g, k),
                GroupAxis::Cols => self.get(k, g),
            };
            let pos = (0..len).filter(|&k| at(k) == MaskState::Positive).count();
            let neg = (0..len).filter(|&k| at(k) == MaskState::Negative).count();
            total += pos * neg;
            positives += pos;
        }
        total as f64 / positives.max(1) as f64
    }
}

/// Scores on a tape together with their mask.
#[derive(Clone, Debug)]
pub struct ScoreMatrix {
    pub scores: NodeId,
    pub mask: ScoreMask,
}

/// Loss and MI estimate as `1 × 1` tape nodes.
#[derive(Clone, Copy, Debug)]
pub struct MiTerm {
    pub loss: NodeId,
    pub mi: NodeId,
}

fn check_scores(tape: &Tape, s: &ScoreMatrix) -> Result<(usize, usize), ObjectiveError> {
    let value = tape.value(s.scores);
    if value.shape() != s.mask.shape() {
        return Err(ObjectiveError::MaskShape {
            mask: s.mask.shape(),
            scores: value.shape(),
        });
    }
    if let Some(k) = value.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(ObjectiveError::NonFinite {
            row: k / value.cols(),
            col: k % value.cols(),
        });
    }
    let p = s.mask.count(MaskState::Positive);
    let q = s.mask.count(MaskState::Negative);
    if p == 0 {
        return Err(ObjectiveError::NoPositives);
    }
    if q == 0 {
        return Err(ObjectiveError::NoNegatives);
    }
    Ok((p, q))
}

/// Builds the estimator loss (negated MI bound) and MI estimate for one
/// score matrix. NT-Xent expects cosine scores and divides by its temperature.
pub fn mi_objective(tape: &mut Tape, s: &ScoreMatrix, est: &Estimator) -> Result<MiTerm, ObjectiveError> {
    est.validate()?;
    let (p, q) = check_scores(tape, s)?;
    let mask = &s.mask;
    let scores = s.scores;
    match est.kind {
        EstimatorKind::Jsd => {
            let neg_s = tape.scale(scores, -1.0)?;
            let sp_pos = tape.softplus(neg_s)?;
            let sp_neg = tape.softplus(scores)?;
            let w_pos = tape.constant(mask.indicator(MaskState::Positive, 1.0 / p as f64));
            let w_neg = tape.constant(mask.indicator(MaskState::Negative, 1.0 / q as f64));
            let a = tape.elementwise_mul(sp_pos, w_pos)?;
            let b = tape.elementwise_mul(sp_neg, w_neg)?;
            let sum = tape.add(a, b)?;
            let loss = tape.sum_all(sum)?;
            let mi = tape.scale(loss, -1.0)?;
            Ok(MiTerm { loss, mi })
        }
        EstimatorKind::Nce | EstimatorKind::NtXent => {
            let scaled = if est.kind == EstimatorKind::NtXent {
                tape.scale(scores, 1.0 / est.temperature)?
            } else {
                scores
            };
            let (grouped, mask) = match mask.axis {
                GroupAxis::Rows => (scaled, mask.clone()),
                GroupAxis::Cols => (tape.transpose(scaled)?, mask.transpose()),
            };
            let (r, c) = mask.shape();
            let bias = tape.constant(mask.negative_bias());
            let masked = tape.add(grouped, bias)?;
            let lse = tape.log_sum_exp_rows(masked)?;
            let ones = tape.constant(Matrix::filled(1, c, 1.0));
            let broadcast = tape.matmul(lse, ones)?;
            let neg_s = tape.scale(grouped, -1.0)?;
            let gap = tape.add(broadcast, neg_s)?;
            let per_entry = tape.softplus(gap)?;
            let w_pos = tape.constant(mask.indicator(MaskState::Positive, 1.0 / p as f64));
            let weighted = tape.elementwise_mul(per_entry, w_pos)?;
            let loss = tape.sum_all(weighted)?;
            debug_assert_eq!(tape.shape(lse), (r, 1));
            let log_n = math::ln(1.0 + mask.negatives_per_positive());
            let neg_loss = tape.scale(loss, -1.0)?;
            let offset = tape.constant(Matrix::scalar(log_n));
            let mi = tape.add(offset, neg_loss)?;
            Ok(MiTerm { loss, mi })
        }
        EstimatorKind::Dv => {
            let w_pos = tape.constant(mask.indicator(MaskState::Positive, 1.0 / p as f64));
            let pos = tape.elementwise_mul(scores, w_pos)?;
            let pos_mean = tape.sum_all(pos)?;
            let bias = tape.constant(mask.negative_bias());
            let masked = tape.add(scores, bias)?;
            let row_lse = tape.log_sum_exp_rows(masked)?;
            let col = tape.transpose(row_lse)?;
            let lse = tape.log_sum_exp_rows(col)?;
            let log_q = tape.constant(Matrix::scalar(-math::ln(q as f64)));
            let log_mean = tape.add(lse, log_q)?;
            let neg_log_mean = tape.scale(log_mean, -1.0)?;
            let mi = tape.add(pos_mean, neg_log_mean)?;
            let loss = tape.scale(mi, -1.0)?;
            Ok(MiTerm { loss, mi })
        }
    }
}

/// Average of the terms of several score matrices.
pub fn averaged_objective(
    tape: &mut Tape,
    matrices: &[ScoreMatrix],
    est: &Estimator,
) -> Result<MiTerm, ObjectiveError> {
    let terms = matrices
        .iter()
        .map(|s| mi_objective(tape, s, est))
        .collect::<Result<Vec<_>, _>>()?;
    average_terms(tape, &terms)
}

pub fn average_terms(tape: &mut Tape, terms: &[MiTerm]) -> Result<MiTerm, ObjectiveError> {
    let w = 1.0 / terms.len().max(1) as f64;
    let mut loss = terms.first().ok_or(ObjectiveError::NoPositives)?.loss;
    let mut mi = terms[0].mi;
    for t in &terms[1..] {
        loss = tape.add(loss, t.loss)?;
        mi = tape.add(mi, t.mi)?;
    }
    Ok(MiTerm {
        loss: tape.scale(loss, w)?,
        mi: tape.scale(mi, w)?,
    })
}

/// Loss and MI estimate of fixed scores.
pub fn mi_values(scores: &Matrix, mask: &ScoreMask, est: &Estimator) -> Result<(f64, f64), ObjectiveError> {
    let mut tape = Tape::new();
    let s = tape.constant(scores.clone());
    let term = mi_objective(
        &mut tape,
        &ScoreMatrix {
            scores: s,
            mask: mask.clone(),
        },
        est,
    )?;
    Ok((scalar(&tape, term.loss), scalar(&tape, term.mi)))
}

/// Symmetric loss and MI estimate of two score matrices (one per direction).
pub fn symmetric_values(
    a: (&Matrix, &ScoreMask),
    b: (&Matrix, &ScoreMask),
    est: &Estimator,
) -> Result<(f64, f64), ObjectiveError> {
    let (la, ma) = mi_values(a.0, a.1, est)?;
    let (lb, mb) = mi_values(b.0, b.1, est)?;
    Ok((0.5 * (la + lb), 0.5 * (ma + mb)))
}

fn scalar(tape: &Tape, id: NodeId) -> f64 {
    tape.value(id).as_slice()[0]
}

/// Rows of `x` under a uniformly random permutation, and that permutation.
pub fn corrupt_features(x: &Matrix, rng: &mut Rng) -> (Matrix, Vec<usize>) {
    let mut perm: Vec<usize> = (0..x.rows()).collect();
    perm.shuffle(rng);
    (x.select_rows(&perm), perm)
}

/// Tape nodes of one view's encoding, as seen by the contrastive objective.
#[derive(Clone, Copy, Debug)]
pub struct ViewOutputs {
    /// Projected node representations, `N × d`.
    pub node: NodeId,
    /// Projected graph representations, `B × d`.
    pub graph: NodeId,
    /// Node and graph representations of the corrupted input, if any.
    pub corrupted: Option<(NodeId, NodeId)>,
}

/// Batch structure needed to lay out scores.
#[derive(Clone, Debug)]
pub struct ScoreLayout {
    pub graph_of_node: Vec<usize>,
    pub num_graphs: usize,
    pub pooling: ScorePooling,
    /// Graphs × nodes averaging operator.
    pub mean_pool: Arc<SparseMatrix>,
}

impl ScoreLayout {
    pub fn new(sizes: &[usize], pooling: ScorePooling) -> Self {
        let graph_of_node = sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &n)| core::iter::repeat_n(g, n))
            .collect();
        Self {
            graph_of_node,
            num_graphs: sizes.len(),
            pooling,
            mean_pool: Arc::new(crate::model::pooling_matrix(sizes, crate::model::Pooling::Mean)),
        }
    }
}

/// Pairwise scoring: the model discriminator, or cosine similarity for NT-Xent.
struct Scorer<'a> {
    model: &'a Model,
    bound: &'a BoundParams,
    cosine: bool,
}

impl Scorer<'_> {
    fn score(&self, tape: &mut Tape, a: NodeId, b: NodeId) -> Result<NodeId, ObjectiveError> {
        if self.cosine {
            let an = tape.normalize_rows(a)?;
            let bn = tape.normalize_rows(b)?;
            let bt = tape.transpose(bn)?;
            Ok(tape.matmul(an, bt)?)
        } else {
            Ok(self.model.discriminate(tape, self.bound, a, b)?)
        }
    }
}

fn vstack(tape: &mut Tape, top: NodeId, bottom: NodeId) -> Result<NodeId, ObjectiveError> {
    let a = tape.transpose(top)?;
    let b = tape.transpose(bottom)?;
    let cat = tape.concat_cols(&[a, b])?;
    Ok(tape.transpose(cat)?)
}

/// Node representations of `src` against graph representations of `dst`.
fn local_global(
    tape: &mut Tape,
    scorer: &Scorer<'_>,
    src: &ViewOutputs,
    dst_graph: NodeId,
    layout: &ScoreLayout,
) -> Result<ScoreMatrix, ObjectiveError> {
    let b = layout.num_graphs;
    let n = layout.graph_of_node.len();
    let raw = scorer.score(tape, src.node, dst_graph)?;
    let raw_corrupt = match src.corrupted {
        Some((node, _)) => Some(scorer.score(tape, node, dst_graph)?),
        None => None,
    };
    if raw_corrupt.is_none() && b < 2 {
        return Err(ObjectiveError::SingleGraph);
    }
    let gon = &layout.graph_of_node;
    match layout.pooling {
        ScorePooling::GraphMean => {
            let pooled = tape.spmm(layout.mean_pool.clone(), raw)?;
            match raw_corrupt {
                None => Ok(ScoreMatrix {
                    scores: pooled,
                    mask: ScoreMask::diagonal(b),
                }),
                Some(rc) => {
                    let pc = tape.spmm(layout.mean_pool.clone(), rc)?;
                    let scores = vstack(tape, pooled, pc)?;
                    Ok(ScoreMatrix {
                        scores,
                        mask: corruption_mask(b, b, |i| i),
                    })
                }
            }
        }
        ScorePooling::PerNode => match raw_corrupt {
            None => Ok(ScoreMatrix {
                scores: raw,
                mask: ScoreMask::new(n, b, GroupAxis::Rows, |u, g| {
                    if gon[u] == g {
                        MaskState::Positive
                    } else {
                        MaskState::Negative
                    }
                }),
            }),
            Some(rc) => {
                let scores = vstack(tape, raw, rc)?;
                Ok(ScoreMatrix {
                    scores,
                    mask: corruption_mask(n, b, |u| gon[u]),
                })
            }
        },
    }
}

/// Rows `0..r` real, rows `r..2r` corrupted; row `i` pairs with column
/// `owner(i)`: positive when real, negative when corrupted.
fn corruption_mask(r: usize, c: usize, owner: impl Fn(usize) -> usize) -> ScoreMask {
    ScoreMask::new(2 * r, c, GroupAxis::Cols, |i, j| {
        let (row, real) = if i < r { (i, true) } else { (i - r, false) };
        match (owner(row) == j, real) {
            (true, true) => MaskState::Positive,
            (true, false) => MaskState::Negative,
            _ => MaskState::Ignored,
        }
    })
}

fn global_global(
    tape: &mut Tape,
    scorer: &Scorer<'_>,
    src: &ViewOutputs,
    dst_graph: NodeId,
    layout: &ScoreLayout,
) -> Result<ScoreMatrix, ObjectiveError> {
    let b = layout.num_graphs;
    let real = scorer.score(tape, src.graph, dst_graph)?;
    match src.corrupted {
        None if b < 2 => Err(ObjectiveError::SingleGraph),
        None => Ok(ScoreMatrix {
            scores: real,
            mask: ScoreMask::diagonal(b),
        }),
        Some((_, graph)) => {
            let fake = scorer.score(tape, graph, dst_graph)?;
            let scores = vstack(tape, real, fake)?;
            Ok(ScoreMatrix {
                scores,
                mask: corruption_mask(b, b, |i| i),
            })
        }
    }
}

/// The two score matrices of one view pair: `α` contrasts the first view's
/// nodes (or graphs) with the second view's graphs, `β` the reverse. In
/// ensemble mode each view is contrasted with itself.
pub fn score_pair(
    tape: &mut Tape,
    model: &Model,
    bound: &BoundParams,
    alpha: &ViewOutputs,
    beta: &ViewOutputs,
    mode: ContrastMode,
    est: &Estimator,
    layout: &ScoreLayout,
) -> Result<(ScoreMatrix, ScoreMatrix), ObjectiveError> {
    let scorer = Scorer {
        model,
        bound,
        cosine: est.kind == EstimatorKind::NtXent,
    };
    Ok(match mode {
        ContrastMode::LocalGlobal => (
            local_global(tape, &scorer, alpha, beta.graph, layout)?,
            local_global(tape, &scorer, beta, alpha.graph, layout)?,
        ),
        ContrastMode::GlobalGlobal => (
            global_global(tape, &scorer, alpha, beta.graph, layout)?,
            global_global(tape, &scorer, beta, alpha.graph, layout)?,
        ),
        ContrastMode::Ensemble => (
            local_global(tape, &scorer, alpha, alpha.graph, layout)?,
            local_global(tape, &scorer, beta, beta.graph, layout)?,
        ),
    })
}

/// Indices of positive entries, for inspection and tests.
pub fn positives(mask: &ScoreMask) -> Vec<(usize, usize)> {
    let (r, c) = mask.shape();
    let mut out = vec![];
    for i in 0..r {
        for j in 0..c {
            if mask.get(i, j) == MaskState::Positive {
                out.push((i, j));
            }
        }
    }
    out
}
