//! Frozen-embedding evaluation protocols.
//!
//! - [`linear_eval_node`]: logistic-regression probe on a train/test split,
//!   repeated over classifier seeds.
//! - [`svm_cv_graph`]: stratified k-fold cross-validated linear SVM with a
//!   grid over `C`, repeated with reshuffled folds.
//! - [`cluster_and_score`]: k-means restarts scored by NMI and ARI.

pub mod folds;
pub mod kmeans;
pub mod logreg;
pub mod metrics;
pub mod svm;

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::graph::{ColumnStats, Split};
use crate::linalg::{LinalgError, Matrix};
use crate::math;
use crate::rng;

pub use folds::stratified_folds;
pub use kmeans::KMeans;
pub use logreg::{LogRegOptions, LogisticRegression};
pub use metrics::{accuracy, ari, nmi};
pub use svm::LinearSvm;

pub const DEFAULT_NODE_RUNS: usize = 50;
pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_REPEATS: usize = 5;
pub const DEFAULT_RESTARTS: usize = 50;
/// `C ∈ {10⁻³, …, 10³}`.
pub const DEFAULT_C_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("embedding rows {rows} do not match label count {labels}")]
    LabelCount { rows: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("training split has a single class")]
    SingleClass,
    #[error("split {0} is empty")]
    EmptySplit(&'static str),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("{samples} samples cannot form {folds} folds")]
    TooFewSamples { samples: usize, folds: usize },
    #[error("class {class} has {count} samples, fewer than {folds} folds")]
    ClassTooSmall { class: usize, count: usize, folds: usize },
    #[error("need at least {k} distinct points for {k} clusters")]
    TooFewDistinctPoints { k: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Protocol {
    NodeLinear,
    GraphSvmCv,
    Clustering,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::NodeLinear, Protocol::GraphSvmCv, Protocol::Clustering];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::NodeLinear => "node_linear",
            Protocol::GraphSvmCv => "graph_svm_cv",
            Protocol::Clustering => "clustering",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// Mean and population standard deviation of per-run values.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub protocol: Protocol,
    pub mean: f64,
    pub std: f64,
    pub per_run: Vec<f64>,
    /// Selected hyperparameter, e.g. the SVM `C`.
    pub chosen: Option<f64>,
}

impl EvalReport {
    pub fn new(protocol: Protocol, per_run: Vec<f64>, chosen: Option<f64>) -> Self {
        let (mean, std) = mean_std(&per_run);
        Self {
            protocol,
            mean,
            std,
            per_run,
            chosen,
        }
    }
}

/// NMI and ARI summaries over k-means restarts.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterReport {
    pub nmi: EvalReport,
    pub ari: EvalReport,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, math::sqrt(var))
}

/// Evaluates `f(run)` for every run index and returns results in run
/// order; runs execute on the rayon pool with the `parallel` feature.
fn map_runs<T: Send>(runs: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..runs).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..runs).map(f).collect()
    }
}

fn class_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

fn check_rows(emb: &Matrix, labels: &[usize]) -> Result<(), EvalError> {
    if emb.rows() != labels.len() {
        return Err(EvalError::LabelCount {
            rows: emb.rows(),
            labels: labels.len(),
        });
    }
    Ok(())
}

/// Test accuracy of a logistic-regression probe trained on the train split,
/// once per classifier seed `derive(seed, run)`.
pub fn linear_eval_node(
    emb: &Matrix,
    labels: &[usize],
    split: &Split,
    runs: usize,
    opts: &LogRegOptions,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    check_rows(emb, labels)?;
    split
        .validate(emb.rows())
        .map_err(|e| EvalError::Split(alloc::format!("{e}")))?;
    if split.train.is_empty() {
        return Err(EvalError::EmptySplit("train"));
    }
    if split.test.is_empty() {
        return Err(EvalError::EmptySplit("test"));
    }
    let y_train: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
    let y_test: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();
    if y_train.iter().all(|&y| y == y_train[0]) {
        return Err(EvalError::SingleClass);
    }
    let classes = class_count(labels);
    let x_train = emb.select_rows(&split.train);
    let x_test = emb.select_rows(&split.test);
    let results = map_runs(runs, |run| -> Result<f64, EvalError> {
        let mut rng = rng::derive(seed, run as u64);
        let model = LogisticRegression::fit(&x_train, &y_train, classes, opts, &mut rng)?;
        Ok(accuracy(&model.predict(&x_test)?, &y_test))
    });
    let per_run = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::new(Protocol::NodeLinear, per_run, None))
}

/// Options of [`svm_cv_graph`].
#[derive(Clone, Debug, PartialEq)]
pub struct SvmCvOptions {
    pub folds: usize,
    pub repeats: usize,
    pub c_grid: Vec<f64>,
    pub iterations: usize,
}

impl Default for SvmCvOptions {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            repeats: DEFAULT_REPEATS,
            c_grid: DEFAULT_C_GRID.to_vec(),
            iterations: svm::DEFAULT_SVM_ITERATIONS,
        }
    }
}

/// Stratified k-fold linear SVM accuracy for each `C`, repeated with folds
/// reshuffled by `derive(seed, repeat)`. Features are standardized with
/// training-fold statistics. Reports the `C` with the best mean accuracy;
/// `per_run` holds its per-repeat mean fold accuracy.
pub fn svm_cv_graph(emb: &Matrix, labels: &[usize], opts: &SvmCvOptions, seed: u64) -> Result<EvalReport, EvalError> {
    check_rows(emb, labels)?;
    if opts.c_grid.is_empty() || opts.repeats == 0 {
        return Err(EvalError::BadParameter("empty C grid or zero repeats"));
    }
    let classes = class_count(labels);
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(EvalError::SingleClass);
    }
    let n = emb.rows();
    let mut fold_sets = Vec::with_capacity(opts.repeats);
    for r in 0..opts.repeats {
        fold_sets.push(stratified_folds(labels, opts.folds, &mut rng::derive(seed, r as u64))?);
    }
    let jobs: Vec<(usize, usize)> = (0..opts.repeats)
        .flat_map(|r| (0..opts.folds).map(move |f| (r, f)))
        .collect();
    let per_job = map_runs(jobs.len(), |j| -> Result<Vec<f64>, EvalError> {
        let (r, f) = jobs[j];
        let test = &fold_sets[r][f];
        let train = folds::complement(n, test);
        let stats = ColumnStats::fit(&emb.select_rows(&train));
        let x_train = stats.apply(&emb.select_rows(&train));
        let x_test = stats.apply(&emb.select_rows(test));
        let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let y_test: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
        opts.c_grid
            .iter()
            .map(|&c| {
                let svm = LinearSvm::fit(&x_train, &y_train, classes, c, opts.iterations)?;
                Ok(accuracy(&svm.predict(&x_test), &y_test))
            })
            .collect()
    });
    let per_job = per_job.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut best: Option<(f64, usize)> = None;
    let mut per_c_runs = Vec::with_capacity(opts.c_grid.len());
    for ci in 0..opts.c_grid.len() {
        let runs: Vec<f64> = (0..opts.repeats)
            .map(|r| (0..opts.folds).map(|f| per_job[r * opts.folds + f][ci]).sum::<f64>() / opts.folds as f64)
            .collect();
        let (mean, _) = mean_std(&runs);
        if best.is_none_or(|(m, _)| mean > m) {
            best = Some((mean, ci));
        }
        per_c_runs.push(runs);
    }
    let (_, ci) = best.expect("non-empty grid");
    Ok(EvalReport::new(
        Protocol::GraphSvmCv,
        per_c_runs.swap_remove(ci),
        Some(opts.c_grid[ci]),
    ))
}

/// K-means with `k` clusters restarted `restarts` times with seeds
/// `derive(seed, restart)`; NMI and ARI of every restart are summarized.
pub fn cluster_and_score(
    emb: &Matrix,
    labels: &[usize],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<ClusterReport, EvalError> {
    check_rows(emb, labels)?;
    if emb.rows() < k {
        return Err(EvalError::TooFewDistinctPoints { k });
    }
    let results = map_runs(restarts, |run| -> Result<(f64, f64), EvalError> {
        let km = KMeans::fit(emb, k, kmeans::DEFAULT_MAX_ITER, &mut rng::derive(seed, run as u64))?;
        Ok((nmi(labels, &km.assignment), ari(labels, &km.assignment)))
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let (n, a): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    Ok(ClusterReport {
        nmi: EvalReport::new(Protocol::Clustering, n, None),
        ari: EvalReport::new(Protocol::Clustering, a, None),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn one_hot(labels: &[usize], k: usize) -> Matrix {
        Matrix::from_fn(labels.len(), k, |i, j| if labels[i] == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn one_hot_node_probe_is_perfect() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let split = Split {
            train: (0..15).collect(),
            val: vec![],
            test: (15..30).collect(),
        };
        let r = linear_eval_node(&one_hot(&labels, 3), &labels, &split, 5, &LogRegOptions::default(), 0).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.std, 0.0);
        assert_eq!(r.per_run.len(), 5);
    }

    #[test]
    fn single_class_train_split_fails() {
        let labels = vec![0, 0, 1, 1];
        let split = Split {
            train: vec![0, 1],
            val: vec![],
            test: vec![2, 3],
        };
        assert_eq!(
            linear_eval_node(&one_hot(&labels, 2), &labels, &split, 1, &LogRegOptions::default(), 0),
            Err(EvalError::SingleClass)
        );
    }

    #[test]
    fn separable_graphs_score_one() {
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let emb = Matrix::from_fn(40, 3, |i, j| {
            let s = if labels[i] == 1 { 1.0 } else { -1.0 };
            s * (1.0 + j as f64) + 0.01 * i as f64
        });
        let opts = SvmCvOptions {
            repeats: 2,
            ..SvmCvOptions::default()
        };
        let r = svm_cv_graph(&emb, &labels, &opts, 0).unwrap();
        assert_eq!(r.mean, 1.0);
        assert!(r.chosen.is_some());
    }

    #[test]
    fn perfect_clusters() {
        let labels: Vec<usize> = (0..12).map(|i| i / 4).collect();
        let emb = Matrix::from_fn(12, 2, |i, j| (labels[i] * 10 + j) as f64 + 0.01 * (i % 4) as f64);
        let r = cluster_and_score(&emb, &labels, 3, 5, 0).unwrap();
        assert!((r.nmi.mean - 1.0).abs() < 1e-12);
        assert!((r.ari.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(Protocol::parse(p.name()), Some(p));
        }
    }
}
