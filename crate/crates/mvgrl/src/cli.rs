//! The `mvgrl` subcommands.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mvgrl_core::autodiff::op_suite_seeds;
use mvgrl_core::diffusion::{build_view, DiffusionCoefficients, Sparsification, ViewKind, ViewSpec, DEFAULT_DENSE_CAP};
use mvgrl_core::evaluation::{
    cluster_and_score, linear_eval_node, svm_cv_graph, LogRegOptions, Protocol, SvmCvOptions, DEFAULT_FOLDS,
    DEFAULT_NODE_RUNS, DEFAULT_REPEATS, DEFAULT_RESTARTS,
};
use mvgrl_core::graph::DEFAULT_DEGREE_CAP;
use mvgrl_core::objectives::{ContrastMode, EstimatorKind};
use mvgrl_core::training::{self, gradcheck_instance, TrainData, TrainError, GRADCHECK_EPS};
use mvgrl_core::Split;
use serde_json::{json, Value};
use thiserror::Error;

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::config::{self, Assignments, ConfigError};
use crate::io::table::{self, contiguous_labels, EmbeddingKind};
use crate::io::{bundle, coo, load_dataset, Dataset, DatasetFormat, FormatError};
use crate::manifest::{fingerprint, tool_version, Artifacts, DatasetRef, RunManifest, MANIFEST_FILE};

pub const DEFAULT_OUT_DIR: &str = "mvgrl-out";
pub const CHECKPOINT_FILE: &str = "model.mvgk";
pub const LOSS_FILE: &str = "loss.csv";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";
pub const REPORT_JSON: &str = "eval_report.json";
pub const REPORT_CSV: &str = "eval_report.csv";
/// Relative-error bound of the gradient checks.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } | ConfigError::Syntax { .. } | ConfigError::Invalid(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "mvgrl", version, about = "Contrastive multi-view graph representation learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build one view matrix per graph and write it as COO text.
    Diffuse(DiffuseArgs),
    /// Train encoders and write checkpoint, loss curve, embeddings and manifest.
    Train(TrainArgs),
    /// Evaluate embeddings with a linear probe, SVM cross-validation or k-means.
    Eval(EvalArgs),
    /// Finite-difference checks of every tape operation and the end-to-end losses.
    Gradcheck(GradcheckArgs),
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (falls back to $MVGRL_OUT_DIR, then ./mvgrl-out).
    #[arg(long, env = "MVGRL_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Single worker and a fixed reduction order; repeated runs are bit-identical.
    #[arg(long)]
    pub strict_deterministic: bool,
    /// Worker threads (default: available parallelism; 1 in strict mode).
    #[arg(long)]
    pub workers: Option<usize>,
}

impl RunArgs {
    fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn workers(&self, strict: bool) -> Result<usize, CliError> {
        if strict {
            return Ok(1);
        }
        match self.workers {
            Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
            Some(w) => Ok(w),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Args)]
pub struct DiffuseArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<DatasetFormat>,
    #[arg(long, default_value = "ppr", value_parser = parse_view)]
    pub view: ViewKind,
    #[arg(long, default_value_t = mvgrl_core::diffusion::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = mvgrl_core::diffusion::DEFAULT_HEAT_T)]
    pub t: f64,
    #[arg(long, conflicts_with = "topk")]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub topk: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    pub dense_cap: usize,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<DatasetFormat>,
    /// Configuration file (`key = value` lines or JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replay the run recorded in a manifest.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    /// Views, in order (repeat or separate with commas).
    #[arg(long = "view", value_delimiter = ',')]
    pub views: Vec<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub topk: Option<usize>,
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Any other configuration key, as KEY=VALUE.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

impl TrainArgs {
    fn overrides(&self) -> Result<Assignments, CliError> {
        let mut a = Assignments::default();
        if !self.views.is_empty() {
            a.set("views", Value::Array(self.views.iter().map(|v| json!(v)).collect()));
        }
        if let Some(v) = self.alpha {
            a.set("alpha", json!(v));
        }
        if let Some(v) = self.t {
            a.set("t", json!(v));
        }
        if let Some(v) = self.epsilon {
            a.set("epsilon", json!(v));
        }
        if let Some(v) = self.topk {
            a.set("topk", json!(v));
        }
        if let Some(v) = &self.estimator {
            a.set("estimator", json!(v));
        }
        if let Some(v) = &self.mode {
            a.set("mode", json!(v));
        }
        if let Some(v) = self.epochs {
            a.set("epochs", json!(v));
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            a.set(k.trim(), config::parse_value(v));
        }
        if let Some(seed) = self.run.seed {
            a.set("seed", json!(seed));
        }
        Ok(a)
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Embeddings CSV written by `train`.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, value_parser = parse_protocol)]
    pub protocol: Protocol,
    /// Labels file (last column of every row); defaults to the dataset's labels.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<DatasetFormat>,
    /// Directory with train.txt / val.txt / test.txt; defaults to the dataset's split.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Probe runs of the node protocol.
    #[arg(long, default_value_t = DEFAULT_NODE_RUNS)]
    pub runs: usize,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    pub repeats: usize,
    /// K-means restarts of the clustering protocol.
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    pub restarts: usize,
    /// Cluster count (default: number of label classes).
    #[arg(long)]
    pub clusters: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 100)]
    pub seeds: u64,
    /// Finite-difference step of the per-operation checks.
    #[arg(long, default_value_t = 1e-6)]
    pub op_eps: f64,
    /// Finite-difference step of the end-to-end checks.
    #[arg(long, default_value_t = GRADCHECK_EPS)]
    pub eps: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub layers: Vec<usize>,
    #[arg(long, default_value = "local_global", value_parser = parse_mode)]
    pub mode: ContrastMode,
    #[arg(long, default_value_t = GRADCHECK_TOLERANCE)]
    pub tolerance: f64,
    #[command(flatten)]
    pub run: RunArgs,
}

fn parse_view(s: &str) -> Result<ViewKind, String> {
    ViewKind::parse(s).ok_or_else(|| format!("unknown view {s:?} (adjacency, ppr, heat, distance)"))
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    Protocol::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Protocol::ALL.iter().map(|p| p.name()).collect();
        format!("unknown protocol {s:?} ({})", names.join(", "))
    })
}

fn parse_mode(s: &str) -> Result<ContrastMode, String> {
    ContrastMode::parse(s).ok_or_else(|| format!("unknown mode {s:?} (local_global, global_global, ensemble)"))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Diffuse(a) => cmd_diffuse(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => match run(cli) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            let _ = e.print();
            e.exit_code() as u8
        }
    }
}

fn relative(path: &Path) -> PathBuf {
    PathBuf::from(path.file_name().expect("artifact paths name a file"))
}

pub fn cmd_diffuse(args: &DiffuseArgs) -> Result<(), CliError> {
    let (data, _) = load_dataset(&args.dataset, args.format)?;
    let coefficients = match args.view {
        ViewKind::Heat => DiffusionCoefficients::heat(args.t),
        _ => DiffusionCoefficients::ppr(args.alpha),
    };
    let sparsification = match (args.epsilon, args.topk) {
        (Some(e), _) => Sparsification::Epsilon(e),
        (None, Some(k)) => Sparsification::TopK(k),
        (None, None) => Sparsification::None,
    };
    let spec = ViewSpec {
        view: args.view,
        coefficients,
        sparsification,
        dense_cap: args.dense_cap,
    };
    let out_dir = args.run.out_dir()?;
    let workers = args.run.workers(args.run.strict_deterministic)?;
    let graphs = data.graphs();
    let views = with_workers(workers, || {
        graphs
            .iter()
            .map(|g| build_view(g.adjacency(), &spec))
            .collect::<Result<Vec<_>, _>>()
    })?
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let path = out_dir.join(format!("view_{}.coo.csv", args.view.name()));
    coo::write_coo(&path, &views)?;
    let nnz: usize = views.iter().map(|v| v.nnz()).sum();
    let sums: Vec<f64> = views.iter().flat_map(|v| v.row_sums()).collect();
    let min = sums.iter().copied().fold(f64::INFINITY, f64::min);
    let max = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "view {}: {} graph(s), nnz {nnz}, row sums min {min:.6} max {max:.6} -> {}",
        args.view,
        views.len(),
        path.display()
    );
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let replay = match &args.manifest {
        Some(path) => {
            let overrides = args.overrides()?;
            if !overrides.0.is_empty() || args.format.is_some() {
                return Err(CliError::Usage(
                    "--manifest replays a recorded run and takes no configuration flags".into(),
                ));
            }
            Some(RunManifest::read(path)?)
        }
        None => None,
    };
    let (cfg, dataset_path, format, strict) = match &replay {
        Some(m) => (
            m.config.clone(),
            args.dataset.clone().unwrap_or_else(|| m.dataset.path.clone()),
            Some(m.dataset.format),
            m.strict_deterministic || args.run.strict_deterministic,
        ),
        None => {
            let mut a = match &args.config {
                Some(path) => config::read_file(path)?,
                None => Assignments::default(),
            };
            a.extend(args.overrides()?);
            let cfg = config::build(&a)?;
            let dataset = args
                .dataset
                .clone()
                .ok_or_else(|| CliError::Usage("--dataset is required".into()))?;
            (cfg, dataset, args.format, args.run.strict_deterministic)
        }
    };
    let workers = args.run.workers(strict)?;
    let out_dir = args.run.out_dir()?;
    let (mut data, format) = load_dataset(&dataset_path, format)?;
    let print = fingerprint(&dataset_path)?;
    if let Some(m) = &replay {
        if m.dataset.fingerprint != print {
            return Err(CliError::Usage(format!(
                "{}: dataset fingerprint {print} differs from the manifest's {}",
                dataset_path.display(),
                m.dataset.fingerprint
            )));
        }
    }
    if let Dataset::Graphs(c) = &mut data {
        let source = c
            .init_features(DEFAULT_DEGREE_CAP)
            .map_err(|e| CliError::Usage(format!("{}: {e}", dataset_path.display())))?;
        eprintln!("features: {source:?}");
    }
    let (train_data, kind) = match &data {
        Dataset::Graphs(c) => (TrainData::Graphs(c), EmbeddingKind::Graph),
        Dataset::Nodes(g) => (TrainData::Transductive(g), EmbeddingKind::Node),
    };
    let output = with_workers(workers, || {
        training::train_with(train_data, &cfg, |r| {
            eprintln!("epoch {:>4}  loss {:.6}  mi {:.6}", r.epoch, r.loss, r.mi);
        })
    })??;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }

    let checkpoint = out_dir.join(CHECKPOINT_FILE);
    Checkpoint::new(cfg.clone(), output.model.clone()).save(&checkpoint)?;
    let loss = out_dir.join(LOSS_FILE);
    table::write_loss(&loss, &output.history)?;
    let embeddings = out_dir.join(EMBEDDINGS_FILE);
    let emb = match kind {
        EmbeddingKind::Graph => &output.embeddings.graph,
        EmbeddingKind::Node => &output.embeddings.node,
    };
    table::write_embeddings(&embeddings, kind, emb)?;
    let manifest = RunManifest {
        tool_version: tool_version(),
        command: "train".into(),
        dataset: DatasetRef {
            path: dataset_path.clone(),
            format,
            fingerprint: print,
        },
        seed: cfg.seed,
        strict_deterministic: strict,
        config: cfg,
        artifacts: Artifacts {
            checkpoint: Some(relative(&checkpoint)),
            loss: Some(relative(&loss)),
            embeddings: Some(relative(&embeddings)),
            ..Artifacts::default()
        },
    };
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    let best = output.history.get(output.best_epoch).map_or(f64::NAN, |r| r.loss);
    println!(
        "trained {} epoch(s){}; best epoch {} (loss {best:.6}); {} embeddings {}x{} -> {}",
        output.history.len(),
        if output.stopped_early { " (early stop)" } else { "" },
        output.best_epoch,
        kind.name(),
        emb.rows(),
        emb.cols(),
        out_dir.display()
    );
    Ok(())
}

struct EvalInputs {
    labels: Vec<usize>,
    classes: usize,
    split: Option<Split>,
}

fn eval_inputs(args: &EvalArgs, rows: usize) -> Result<EvalInputs, CliError> {
    let (raw, mut split) = match (&args.labels, &args.dataset) {
        (Some(path), _) => (table::read_labels(path)?, None),
        (None, Some(dir)) => match load_dataset(dir, args.format)?.0 {
            Dataset::Graphs(c) => {
                let labels = c.labels().into_iter().map(|l| l as i64).collect();
                (labels, None)
            }
            Dataset::Nodes(g) => {
                let labels = g
                    .node_labels
                    .clone()
                    .ok_or_else(|| CliError::Usage(format!("{}: no node labels", dir.display())))?;
                (labels, g.split.clone())
            }
        },
        (None, None) => return Err(CliError::Usage("pass --labels or --dataset".into())),
    };
    if raw.len() != rows {
        return Err(CliError::Usage(format!(
            "{} has {rows} rows but there are {} labels",
            args.embeddings.display(),
            raw.len()
        )));
    }
    if let Some(dir) = &args.split {
        split = bundle::read_split(dir, rows)?;
    }
    let (labels, classes) = contiguous_labels(&raw);
    Ok(EvalInputs { labels, classes, split })
}

fn write_report(out_dir: &Path, json: &Value, rows: Vec<Vec<String>>) -> Result<(), CliError> {
    let path = out_dir.join(REPORT_JSON);
    std::fs::write(&path, serde_json::to_string_pretty(json).expect("report serializes") + "\n")
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    table::write_rows(&out_dir.join(REPORT_CSV), &["metric", "run", "value"], &rows)?;
    Ok(())
}

fn run_rows(metric: &str, values: &[f64]) -> Vec<Vec<String>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| vec![metric.to_owned(), i.to_string(), format!("{v:?}")])
        .collect()
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let (kind, emb) = table::read_embeddings(&args.embeddings)?;
    let expected = match args.protocol {
        Protocol::NodeLinear => Some(EmbeddingKind::Node),
        Protocol::GraphSvmCv => Some(EmbeddingKind::Graph),
        Protocol::Clustering => None,
    };
    if let Some(expected) = expected {
        if expected != kind {
            return Err(CliError::Usage(format!(
                "protocol {} needs {} embeddings but {} holds {} embeddings",
                args.protocol.name(),
                expected.name(),
                args.embeddings.display(),
                kind.name()
            )));
        }
    }
    let inputs = eval_inputs(args, emb.rows())?;
    let seed = args.run.seed.unwrap_or(0);
    let workers = args.run.workers(args.run.strict_deterministic)?;
    let out_dir = args.run.out_dir()?;
    let usage = |e: mvgrl_core::evaluation::EvalError| CliError::Usage(e.to_string());
    match args.protocol {
        Protocol::NodeLinear => {
            let split = inputs
                .split
                .ok_or_else(|| CliError::Usage("node_linear needs a split (--split or a bundle --dataset)".into()))?;
            let report = with_workers(workers, || {
                linear_eval_node(&emb, &inputs.labels, &split, args.runs, &LogRegOptions::default(), seed)
            })?
            .map_err(usage)?;
            write_report(&out_dir, &json!(report), run_rows("accuracy", &report.per_run))?;
            println!("node_linear accuracy: {:.3} ± {:.3}", report.mean, report.std);
        }
        Protocol::GraphSvmCv => {
            let opts = SvmCvOptions {
                folds: args.folds,
                repeats: args.repeats,
                ..SvmCvOptions::default()
            };
            let report = with_workers(workers, || svm_cv_graph(&emb, &inputs.labels, &opts, seed))?.map_err(usage)?;
            write_report(&out_dir, &json!(report), run_rows("accuracy", &report.per_run))?;
            println!(
                "graph_svm_cv accuracy: {:.3} ± {:.3} (C = {})",
                report.mean,
                report.std,
                report.chosen.unwrap_or(f64::NAN)
            );
        }
        Protocol::Clustering => {
            let k = args.clusters.unwrap_or(inputs.classes);
            let report = with_workers(workers, || cluster_and_score(&emb, &inputs.labels, k, args.restarts, seed))?
                .map_err(usage)?;
            let mut rows = run_rows("nmi", &report.nmi.per_run);
            rows.extend(run_rows("ari", &report.ari.per_run));
            write_report(&out_dir, &json!(report), rows)?;
            println!(
                "clustering NMI: {:.4} ± {:.4}  ARI: {:.4} ± {:.4}",
                report.nmi.mean, report.nmi.std, report.ari.mean, report.ari.std
            );
        }
    }
    Ok(())
}

/// One row of the gradient-check table.
#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckRow {
    pub check: String,
    pub cases: usize,
    pub max_rel_err: f64,
    pub failing_cases: usize,
}

/// Per-operation and end-to-end gradient checks over `args.seeds` seeds.
pub fn gradcheck_rows(args: &GradcheckArgs) -> Result<Vec<GradcheckRow>, CliError> {
    let runtime = |e: &dyn std::fmt::Display| CliError::Runtime(e.to_string());
    let mut rows = Vec::new();
    for seed in 0..args.seeds {
        let report = op_suite_seed(seed, args.op_eps).map_err(|e| runtime(&e))?;
        for (i, c) in report.into_iter().enumerate() {
            if rows.len() <= i {
                rows.push(GradcheckRow {
                    check: format!("op:{}", c.0),
                    cases: 0,
                    max_rel_err: 0.0,
                    failing_cases: 0,
                });
            }
            let row = &mut rows[i];
            row.cases += 1;
            row.max_rel_err = row.max_rel_err.max(c.1);
            row.failing_cases += usize::from(c.1 > args.tolerance);
        }
    }
    for estimator in EstimatorKind::ALL {
        for &layers in &args.layers {
            let mut row = GradcheckRow {
                check: format!("loss:{}:{}:L{layers}", estimator.name(), args.mode.name()),
                cases: 0,
                max_rel_err: 0.0,
                failing_cases: 0,
            };
            for seed in 0..args.seeds {
                let err = gradcheck_instance(seed, estimator, args.mode, layers, args.eps).map_err(|e| runtime(&e))?;
                row.cases += 1;
                row.max_rel_err = row.max_rel_err.max(err);
                row.failing_cases += usize::from(err > args.tolerance);
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Op-suite errors of a single seed, as `(op name, max relative error)`.
fn op_suite_seed(seed: u64, eps: f64) -> Result<Vec<(&'static str, f64)>, mvgrl_core::autodiff::AutodiffError> {
    let report = op_suite_seeds(seed..seed + 1, eps)?;
    Ok(report.checks.iter().map(|c| (c.op.name(), c.max_rel_err)).collect())
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    let workers = args.run.workers(args.run.strict_deterministic)?;
    let rows = with_workers(workers, || gradcheck_rows(args))??;
    println!("check,cases,max_rel_err,failing_cases,pass");
    let mut failed = 0;
    for r in &rows {
        let pass = r.failing_cases == 0;
        failed += usize::from(!pass);
        println!("{},{},{:e},{},{}", r.check, r.cases, r.max_rel_err, r.failing_cases, pass);
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!(
            "{failed} of {} checks exceed relative error {:e}",
            rows.len(),
            args.tolerance
        )));
    }
    Ok(())
}
