//! Structural views: generalized graph diffusion, PPR and heat kernels, the
//! shortest-path distance view, and sparsification.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::graph::{normalize_adjacency, GraphError};
use crate::linalg::{lu_inverse, LinalgError, Matrix, SparseMatrix};
use crate::math;

pub const DEFAULT_ALPHA: f64 = 0.2;
pub const DEFAULT_HEAT_T: f64 = 5.0;
/// Largest node count for which dense closed forms are attempted.
pub const DEFAULT_DENSE_CAP: usize = 20_000;
/// Truncation tolerance used when a series order is chosen automatically.
pub const DEFAULT_SERIES_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffusionError {
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
    #[error("diffusion time t must be positive, got {0}")]
    HeatTime(f64),
    #[error("explicit coefficient {index} is {value}, outside [0, 1]")]
    ThetaRange { index: usize, value: f64 },
    #[error("explicit coefficients sum to {0}, which exceeds 1")]
    ThetaSum(f64),
    #[error("custom diffusion needs an explicit coefficient list")]
    MissingTheta,
    #[error("coefficient list has {len} entries but {expected} are needed for K = {k}")]
    ThetaLength { len: usize, expected: usize, k: usize },
    #[error("graph has {n} nodes, above the dense cap of {cap}; use series mode with sparsification")]
    TooLarge { n: usize, cap: usize },
    #[error("sparsification emptied row {row}; use a smaller epsilon")]
    EmptyRow { row: usize },
    #[error("sparsification epsilon must be a finite non-negative number, got {0}")]
    Epsilon(f64),
    #[error("top-k sparsification needs k >= 1")]
    TopK,
    #[error("node {0} has zero degree; patch isolated nodes first")]
    ZeroDegree(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DiffusionKind {
    Ppr,
    Heat,
    Custom,
}

/// Coefficients θ_k of a diffusion `S = Σ θ_k T^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionCoefficients {
    pub kind: DiffusionKind,
    /// Teleport probability for PPR.
    pub alpha: f64,
    /// Diffusion time for the heat kernel.
    pub t: f64,
    /// Explicit coefficients, required for [`DiffusionKind::Custom`].
    pub theta: Option<Vec<f64>>,
}

impl DiffusionCoefficients {
    pub fn ppr(alpha: f64) -> Self {
        Self {
            kind: DiffusionKind::Ppr,
            alpha,
            t: DEFAULT_HEAT_T,
            theta: None,
        }
    }

    pub fn heat(t: f64) -> Self {
        Self {
            kind: DiffusionKind::Heat,
            alpha: DEFAULT_ALPHA,
            t,
            theta: None,
        }
    }

    pub fn custom(theta: Vec<f64>) -> Self {
        Self {
            kind: DiffusionKind::Custom,
            alpha: DEFAULT_ALPHA,
            t: DEFAULT_HEAT_T,
            theta: Some(theta),
        }
    }

    pub fn validate(&self) -> Result<(), DiffusionError> {
        match self.kind {
            DiffusionKind::Ppr => check_alpha(self.alpha)?,
            DiffusionKind::Heat => check_time(self.t)?,
            DiffusionKind::Custom => {
                if self.theta.is_none() {
                    return Err(DiffusionError::MissingTheta);
                }
            }
        }
        if let Some(theta) = &self.theta {
            for (index, &value) in theta.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(DiffusionError::ThetaRange { index, value });
                }
            }
            let sum: f64 = theta.iter().sum();
            if sum > 1.0 + 1e-9 {
                return Err(DiffusionError::ThetaSum(sum));
            }
        }
        Ok(())
    }

    /// The first `k + 1` coefficients θ_0..θ_k.
    pub fn series(&self, k: usize) -> Result<Vec<f64>, DiffusionError> {
        self.validate()?;
        if let Some(theta) = &self.theta {
            return Ok((0..=k).map(|i| theta.get(i).copied().unwrap_or(0.0)).collect());
        }
        let mut out = Vec::with_capacity(k + 1);
        match self.kind {
            DiffusionKind::Ppr => {
                let mut c = self.alpha;
                for _ in 0..=k {
                    out.push(c);
                    c *= 1.0 - self.alpha;
                }
            }
            DiffusionKind::Heat => {
                let mut c = math::exp(-self.t);
                for i in 0..=k {
                    out.push(c);
                    c *= self.t / (i + 1) as f64;
                }
            }
            DiffusionKind::Custom => return Err(DiffusionError::MissingTheta),
        }
        Ok(out)
    }

    /// Smallest order K whose neglected coefficient mass is below `tol`.
    pub fn truncation_order(&self, tol: f64) -> Result<usize, DiffusionError> {
        self.validate()?;
        if let Some(theta) = &self.theta {
            return Ok(theta.len().saturating_sub(1));
        }
        let mut mass = 0.0;
        let mut k = 0;
        loop {
            let theta = self.series(k)?;
            mass += theta[k];
            if 1.0 - mass < tol || k >= 10_000 {
                return Ok(k);
            }
            k += 1;
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), DiffusionError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(DiffusionError::Alpha(alpha))
    }
}

fn check_time(t: f64) -> Result<(), DiffusionError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(DiffusionError::HeatTime(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ViewKind {
    Adjacency,
    Ppr,
    Heat,
    Distance,
}

impl ViewKind {
    pub const ALL: [ViewKind; 4] = [
        ViewKind::Adjacency,
        ViewKind::Ppr,
        ViewKind::Heat,
        ViewKind::Distance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ViewKind::Adjacency => "adjacency",
            ViewKind::Ppr => "ppr",
            ViewKind::Heat => "heat",
            ViewKind::Distance => "distance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s || (s == "adj" && *v == ViewKind::Adjacency))
    }
}

impl core::fmt::Display for ViewKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Optional post-processing of a dense view.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Sparsification {
    #[default]
    None,
    /// Drop entries strictly below the threshold.
    Epsilon(f64),
    /// Keep the `k` largest entries of every row.
    TopK(usize),
}

impl Sparsification {
    pub fn validate(&self) -> Result<(), DiffusionError> {
        match *self {
            Sparsification::None => Ok(()),
            Sparsification::Epsilon(e) if e.is_finite() && e >= 0.0 => Ok(()),
            Sparsification::Epsilon(e) => Err(DiffusionError::Epsilon(e)),
            Sparsification::TopK(0) => Err(DiffusionError::TopK),
            Sparsification::TopK(_) => Ok(()),
        }
    }
}

/// How to build one structural view of a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewSpec {
    pub view: ViewKind,
    pub coefficients: DiffusionCoefficients,
    pub sparsification: Sparsification,
    pub dense_cap: usize,
}

impl ViewSpec {
    pub fn adjacency() -> Self {
        Self::new(ViewKind::Adjacency)
    }

    pub fn ppr(alpha: f64) -> Self {
        Self {
            coefficients: DiffusionCoefficients::ppr(alpha),
            ..Self::new(ViewKind::Ppr)
        }
    }

    pub fn heat(t: f64) -> Self {
        Self {
            coefficients: DiffusionCoefficients::heat(t),
            ..Self::new(ViewKind::Heat)
        }
    }

    pub fn distance() -> Self {
        Self::new(ViewKind::Distance)
    }

    /// Defaults for a view kind: α = 0.2, t = 5, no sparsification.
    pub fn new(view: ViewKind) -> Self {
        let coefficients = match view {
            ViewKind::Heat => DiffusionCoefficients::heat(DEFAULT_HEAT_T),
            _ => DiffusionCoefficients::ppr(DEFAULT_ALPHA),
        };
        Self {
            view,
            coefficients,
            sparsification: Sparsification::None,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    pub fn with_sparsification(mut self, s: Sparsification) -> Self {
        self.sparsification = s;
        self
    }
}

/// `Σ_{k=0..K} θ_k T^k` by iterated multiplication.
pub fn generalized_diffusion(t: &Matrix, theta: &[f64], k: usize) -> Result<Matrix, DiffusionError> {
    if t.rows() != t.cols() {
        return Err(LinalgError::NotSquare {
            op: "generalized_diffusion",
            rows: t.rows(),
            cols: t.cols(),
        }
        .into());
    }
    if theta.len() != k + 1 {
        return Err(DiffusionError::ThetaLength {
            len: theta.len(),
            expected: k + 1,
            k,
        });
    }
    let n = t.rows();
    let mut power = Matrix::identity(n);
    let mut out = Matrix::zeros(n, n);
    for (i, &c) in theta.iter().enumerate() {
        if i > 0 {
            power = power.matmul(t)?;
        }
        out.axpy(c, &power)?;
    }
    Ok(out)
}

/// Adds a unit self-loop to every node with zero degree.
pub fn patch_isolated(a: &SparseMatrix) -> SparseMatrix {
    let sums = a.row_sums();
    if sums.iter().all(|&s| s != 0.0) {
        return a.clone();
    }
    let loops = sums
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == 0.0)
        .map(|(i, _)| (i, i, 1.0));
    SparseMatrix::from_triplets(a.n_rows(), a.n_cols(), a.iter().chain(loops))
        .expect("patched adjacency stays in bounds")
}

fn degrees(a: &SparseMatrix) -> Result<Vec<f64>, DiffusionError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            op: "diffusion",
            rows: a.n_rows(),
            cols: a.n_cols(),
        }
        .into());
    }
    let d = a.row_sums();
    if let Some(i) = d.iter().position(|&x| x <= 0.0) {
        return Err(DiffusionError::ZeroDegree(i));
    }
    Ok(d)
}

/// `D^{-1/2} A D^{-1/2}` on the raw adjacency.
pub fn sym_transition(a: &SparseMatrix) -> Result<SparseMatrix, DiffusionError> {
    let s: Vec<f64> = degrees(a)?.into_iter().map(|d| 1.0 / math::sqrt(d)).collect();
    Ok(a.scale_rows_cols(&s, &s))
}

/// `A D^{-1}`, column-stochastic.
pub fn column_transition(a: &SparseMatrix) -> Result<SparseMatrix, DiffusionError> {
    let inv: Vec<f64> = degrees(a)?.into_iter().map(|d| 1.0 / d).collect();
    let ones = vec![1.0; a.n_rows()];
    Ok(a.scale_rows_cols(&ones, &inv))
}

/// Personalized PageRank kernel `α (I − (1−α) D^{-1/2} A D^{-1/2})^{-1}`.
pub fn ppr_diffusion(a: &SparseMatrix, alpha: f64) -> Result<Matrix, DiffusionError> {
    ppr_diffusion_capped(a, alpha, DEFAULT_DENSE_CAP)
}

pub fn ppr_diffusion_capped(a: &SparseMatrix, alpha: f64, cap: usize) -> Result<Matrix, DiffusionError> {
    check_alpha(alpha)?;
    let n = a.n_rows();
    if n > cap {
        return Err(DiffusionError::TooLarge { n, cap });
    }
    let t = sym_transition(a)?.to_dense();
    let mut m = t.scale(-(1.0 - alpha));
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    let mut s = lu_inverse(&m)?.scale(alpha);
    symmetrize(&mut s);
    Ok(s)
}

fn symmetrize(s: &mut Matrix) {
    let n = s.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
}

/// Heat kernel `exp(t (A D^{-1} − I))` by scaling and squaring.
pub fn heat_diffusion(a: &SparseMatrix, t: f64) -> Result<Matrix, DiffusionError> {
    heat_diffusion_capped(a, t, DEFAULT_DENSE_CAP)
}

pub fn heat_diffusion_capped(a: &SparseMatrix, t: f64, cap: usize) -> Result<Matrix, DiffusionError> {
    check_time(t)?;
    let n = a.n_rows();
    if n > cap {
        return Err(DiffusionError::TooLarge { n, cap });
    }
    let mut g = column_transition(a)?.to_dense().scale(t);
    for i in 0..n {
        g[(i, i)] -= t;
    }
    Ok(expm(&g)?)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &Matrix) -> Result<Matrix, LinalgError> {
    let n = m.rows();
    if m.cols() != n {
        return Err(LinalgError::NotSquare {
            op: "expm",
            rows: n,
            cols: m.cols(),
        });
    }
    let norm = m.one_norm();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = m.scale(scale);
    let mut out = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=30 {
        term = term.matmul(&x)?.scale(1.0 / k as f64);
        out.add_assign(&term)?;
        if term.max_abs() <= f64::EPSILON * 1e-3 {
            break;
        }
    }
    for _ in 0..squarings {
        out = out.matmul(&out)?;
    }
    Ok(out)
}

/// Hop distances by breadth-first search; `None` for unreachable pairs.
pub fn hop_distances(a: &SparseMatrix) -> Vec<Vec<Option<usize>>> {
    let n = a.n_rows();
    let mut out = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for src in 0..n {
        let mut dist = vec![None; n];
        dist[src] = Some(0);
        queue.clear();
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in a.row(u).0 {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        out.push(dist);
    }
    out
}

/// Row-wise softmax of inverse hop distances (0 on the diagonal and for
/// unreachable pairs).
pub fn distance_view(a: &SparseMatrix) -> Matrix {
    let n = a.n_rows();
    let dist = hop_distances(a);
    let mut out = Matrix::zeros(n, n);
    for (i, row) in dist.iter().enumerate() {
        let logits: Vec<f64> = row
            .iter()
            .map(|d| match d {
                Some(d) if *d > 0 => 1.0 / *d as f64,
                _ => 0.0,
            })
            .collect();
        let lse = math::log_sum_exp(&logits);
        for (o, l) in out.row_mut(i).iter_mut().zip(&logits) {
            *o = math::exp(l - lse);
        }
    }
    out
}

/// Sparsifies a non-negative dense matrix, renormalizing each surviving row
/// to its original sum.
pub fn sparsify(s: &Matrix, mode: Sparsification) -> Result<SparseMatrix, DiffusionError> {
    mode.validate()?;
    let mut triplets = Vec::new();
    for i in 0..s.rows() {
        sparsify_row(s.row(i), i, mode, &mut triplets)?;
    }
    Ok(SparseMatrix::from_triplets(s.rows(), s.cols(), triplets)?)
}

fn sparsify_row(
    row: &[f64],
    i: usize,
    mode: Sparsification,
    out: &mut Vec<(usize, usize, f64)>,
) -> Result<(), DiffusionError> {
    let total: f64 = row.iter().sum();
    let kept: Vec<usize> = match mode {
        Sparsification::None => (0..row.len()).filter(|&j| row[j] != 0.0).collect(),
        Sparsification::Epsilon(eps) => (0..row.len())
            .filter(|&j| row[j] != 0.0 && row[j] >= eps)
            .collect(),
        Sparsification::TopK(k) => {
            let mut order: Vec<usize> = (0..row.len()).filter(|&j| row[j] != 0.0).collect();
            order.sort_by(|&x, &y| row[y].total_cmp(&row[x]).then(x.cmp(&y)));
            order.truncate(k);
            order.sort_unstable();
            order
        }
    };
    if kept.is_empty() && total != 0.0 {
        return Err(DiffusionError::EmptyRow { row: i });
    }
    let kept_sum: f64 = kept.iter().map(|&j| row[j]).sum();
    let factor = if mode == Sparsification::None || kept_sum == 0.0 {
        1.0
    } else {
        total / kept_sum
    };
    out.extend(kept.into_iter().map(|j| (i, j, row[j] * factor)));
    Ok(())
}

/// Transition operator used by the series for a given kernel: the
/// symmetric normalization for PPR and custom coefficients, `A D^{-1}` for heat.
pub fn series_transition(a: &SparseMatrix, kind: DiffusionKind) -> Result<SparseMatrix, DiffusionError> {
    match kind {
        DiffusionKind::Heat => column_transition(a),
        DiffusionKind::Ppr | DiffusionKind::Custom => sym_transition(a),
    }
}

/// Truncated diffusion series evaluated a block of rows at a time and
/// sparsified on the fly, so that the dense `n × n` result is never held.
pub fn series_diffusion(
    a: &SparseMatrix,
    coefficients: &DiffusionCoefficients,
    k: usize,
    mode: Sparsification,
) -> Result<SparseMatrix, DiffusionError> {
    mode.validate()?;
    let theta = coefficients.series(k)?;
    let t = series_transition(a, coefficients.kind)?;
    // Row i of S is column i of S^T = Σ θ_k (T^T)^k e_i.
    let tt = t.transpose();
    let n = a.n_rows();
    const BLOCK: usize = 256;
    let mut triplets = Vec::new();
    let mut start = 0;
    while start < n {
        let width = BLOCK.min(n - start);
        let mut power = Matrix::from_fn(n, width, |r, c| if r == start + c { 1.0 } else { 0.0 });
        let mut acc = power.scale(theta[0]);
        for &c in &theta[1..] {
            power = tt.spmm(&power)?;
            acc.axpy(c, &power)?;
        }
        let rows = acc.transpose();
        for c in 0..width {
            sparsify_row(rows.row(c), start + c, mode, &mut triplets)?;
        }
        start += width;
    }
    Ok(SparseMatrix::from_triplets(n, n, triplets)?)
}

/// Builds the view matrix fed to an encoder. The adjacency view is the
/// self-loop normalized adjacency; diffusion views patch isolated nodes and
/// fall back to the sparsified series above the dense cap.
pub fn build_view(a: &SparseMatrix, spec: &ViewSpec) -> Result<SparseMatrix, DiffusionError> {
    spec.sparsification.validate()?;
    let n = a.n_rows();
    match spec.view {
        ViewKind::Adjacency => Ok(normalize_adjacency(a)?),
        ViewKind::Distance => sparsify(&distance_view(a), spec.sparsification),
        ViewKind::Ppr | ViewKind::Heat => {
            let patched = patch_isolated(a);
            let mut coefficients = spec.coefficients.clone();
            coefficients.kind = if spec.view == ViewKind::Ppr {
                DiffusionKind::Ppr
            } else {
                DiffusionKind::Heat
            };
            coefficients.validate()?;
            if n > spec.dense_cap {
                if spec.sparsification == Sparsification::None {
                    return Err(DiffusionError::TooLarge {
                        n,
                        cap: spec.dense_cap,
                    });
                }
                let k = coefficients.truncation_order(DEFAULT_SERIES_TOL)?;
                return series_diffusion(&patched, &coefficients, k, spec.sparsification);
            }
            let dense = match spec.view {
                ViewKind::Ppr => ppr_diffusion_capped(&patched, coefficients.alpha, spec.dense_cap)?,
                _ => heat_diffusion_capped(&patched, coefficients.t, spec.dense_cap)?,
            };
            sparsify(&dense, spec.sparsification)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::adjacency_from_edges;

    fn path2() -> SparseMatrix {
        adjacency_from_edges(2, &[(0, 1)]).unwrap()
    }

    #[test]
    fn series_trivial_cases() {
        let t = Matrix::from_rows(&[[0.3, 0.7], [0.1, 0.2]]);
        assert_eq!(generalized_diffusion(&t, &[1.0], 0).unwrap(), Matrix::identity(2));
        assert_eq!(generalized_diffusion(&t, &[0.0, 1.0], 1).unwrap(), t);
        assert!(matches!(
            generalized_diffusion(&t, &[1.0], 1),
            Err(DiffusionError::ThetaLength { .. })
        ));
    }

    #[test]
    fn ppr_small_cases() {
        let one = SparseMatrix::identity(1);
        assert!(ppr_diffusion(&one, 0.2).unwrap().max_abs_diff(&Matrix::scalar(1.0)) < 1e-15);
        let s = ppr_diffusion(&path2(), 0.2).unwrap();
        let expected = Matrix::from_rows(&[[5.0 / 9.0, 4.0 / 9.0], [4.0 / 9.0, 5.0 / 9.0]]);
        assert!(s.max_abs_diff(&expected) < 1e-14);
        assert!(matches!(ppr_diffusion(&path2(), 1.0), Err(DiffusionError::Alpha(_))));
    }

    #[test]
    fn ppr_series_matches_closed_form_on_path() {
        let t = sym_transition(&path2()).unwrap().to_dense();
        let theta = DiffusionCoefficients::ppr(0.2).series(200).unwrap();
        let series = generalized_diffusion(&t, &theta, 200).unwrap();
        let closed = ppr_diffusion(&path2(), 0.2).unwrap();
        assert!(series.max_abs_diff(&closed) <= 1e-8);
    }

    #[test]
    fn heat_small_cases() {
        let one = SparseMatrix::identity(1);
        assert!(heat_diffusion(&one, 5.0).unwrap().max_abs_diff(&Matrix::scalar(1.0)) < 1e-15);
        let s = heat_diffusion(&path2(), 5.0).unwrap();
        let e = (-10.0f64).exp();
        let expected = Matrix::from_rows(&[[(1.0 + e) / 2.0, (1.0 - e) / 2.0], [(1.0 - e) / 2.0, (1.0 + e) / 2.0]]);
        assert!(s.max_abs_diff(&expected) < 1e-12);
        assert!(matches!(heat_diffusion(&path2(), 0.0), Err(DiffusionError::HeatTime(_))));
    }

    #[test]
    fn distance_view_cases() {
        let tri = adjacency_from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let d = distance_view(&tri);
        let e = core::f64::consts::E;
        let expected = [1.0 / (1.0 + 2.0 * e), e / (1.0 + 2.0 * e), e / (1.0 + 2.0 * e)];
        for (a, b) in d.row(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(distance_view(&SparseMatrix::zeros(1, 1)), Matrix::scalar(1.0));
        assert_eq!(distance_view(&SparseMatrix::zeros(2, 2)), Matrix::filled(2, 2, 0.5));
    }

    #[test]
    fn sparsify_cases() {
        let s = Matrix::from_rows(&[[0.6, 0.4], [0.4, 0.6]]);
        assert_eq!(sparsify(&s, Sparsification::Epsilon(0.0)).unwrap().to_dense(), s);
        assert_eq!(
            sparsify(&s, Sparsification::Epsilon(0.5)).unwrap().to_dense(),
            Matrix::identity(2)
        );
        assert_eq!(sparsify(&s, Sparsification::TopK(2)).unwrap().to_dense(), s);
        assert_eq!(
            sparsify(&s, Sparsification::TopK(1)).unwrap().to_dense(),
            Matrix::identity(2)
        );
        assert!(matches!(
            sparsify(&s, Sparsification::Epsilon(0.7)),
            Err(DiffusionError::EmptyRow { row: 0 })
        ));
    }

    #[test]
    fn coefficient_validation() {
        assert!(DiffusionCoefficients::custom(vec![0.5, 0.6]).validate().is_err());
        assert!(DiffusionCoefficients::custom(vec![0.5, -0.1]).validate().is_err());
        assert!(DiffusionCoefficients::custom(vec![0.5, 0.5]).validate().is_ok());
    }

    #[test]
    fn series_mode_matches_dense_closed_form() {
        let a = adjacency_from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]).unwrap();
        for spec in [ViewSpec::ppr(0.2), ViewSpec::heat(3.0)] {
            let dense = build_view(&a, &spec).unwrap().to_dense();
            let mut capped = spec.clone().with_sparsification(Sparsification::Epsilon(0.0));
            capped.dense_cap = 2;
            let series = build_view(&a, &capped).unwrap().to_dense();
            assert!(dense.max_abs_diff(&series) < 1e-8);
        }
    }

    #[test]
    fn isolated_nodes_are_patched() {
        let a = adjacency_from_edges(3, &[(0, 1)]).unwrap();
        let s = build_view(&a, &ViewSpec::ppr(0.2)).unwrap().to_dense();
        assert!((s[(2, 2)] - 1.0).abs() < 1e-12);
    }
}
