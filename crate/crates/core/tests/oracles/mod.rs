//! Independent reference computations shared by the integration and
//! acceptance tests. Dense references use nalgebra.

#![allow(dead_code)]

use std::sync::Arc;

use mvgrl_core::autodiff::Tape;
use mvgrl_core::diffusion::{heat_diffusion, ppr_diffusion, build_view, ViewSpec};
use mvgrl_core::graph::adjacency_from_edges;
use mvgrl_core::model::{pooling_matrix, readout, GraphBatch, Model, ModelConfig, Pooling};
use mvgrl_core::objectives::{mi_values, Estimator, EstimatorKind, GroupAxis, MaskState, ScoreMask};
use mvgrl_core::rng::{self, Rng};
use mvgrl_core::{Matrix, SparseMatrix};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng as _;

pub type Edges = Vec<(usize, usize)>;

/// Random spanning tree plus extra edges with probability `p`.
pub fn random_connected(rng: &mut Rng, n: usize, p: f64) -> Edges {
    let mut edges: Edges = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) && !edges.contains(&(i, j)) {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Circulant graph on `n` nodes joining each node to its `half` nearest
/// neighbours on either side, `2·half`-regular for `n > 2·half`.
pub fn circulant(n: usize, half: usize) -> Edges {
    let mut edges = Edges::new();
    for i in 0..n {
        for o in 1..=half {
            let j = (i + o) % n;
            edges.push((i.min(j), i.max(j)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

pub fn dense_adjacency(n: usize, edges: &[(usize, usize)]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for &(u, v) in edges {
        a[(u, v)] = 1.0;
        a[(v, u)] = 1.0;
    }
    a
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn degrees(a: &DMatrix<f64>) -> Vec<f64> {
    a.row_iter().map(|r| r.sum()).collect()
}

/// `Σ_{k=0..K} α(1−α)^k T^k` with `T = D^{-1/2} A D^{-1/2}`.
pub fn ppr_series(a: &DMatrix<f64>, alpha: f64, k: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let d = degrees(a);
    let t = DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (d[i] * d[j]).sqrt());
    let mut power = DMatrix::identity(n, n);
    let mut out = DMatrix::zeros(n, n);
    let mut theta = alpha;
    for step in 0..=k {
        if step > 0 {
            power = &power * &t;
            theta *= 1.0 - alpha;
        }
        out += &power * theta;
    }
    out
}

/// `exp(t (A D^{-1} − I))` through the eigendecomposition of the similar
/// symmetric matrix `D^{-1/2} A D^{-1/2}`.
pub fn heat_eigen(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let d = degrees(a);
    let sym = DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (d[i] * d[j]).sqrt());
    let eig = SymmetricEigen::new(sym);
    let scaled = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (t * (l - 1.0)).exp()));
    let inner = &eig.eigenvectors * scaled * eig.eigenvectors.transpose();
    DMatrix::from_fn(n, n, |i, j| inner[(i, j)] * (d[i] / d[j]).sqrt())
}

/// Largest ∞-norm gap between the PPR kernel and its 200-term series over
/// `graphs` random connected graphs with at most `max_n` nodes.
pub fn ppr_series_gap(graphs: usize, max_n: usize, seed: u64) -> f64 {
    let mut rng = rng::seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..graphs {
        let n = rng.gen_range(2..=max_n);
        let edges = random_connected(&mut rng, n, 0.2);
        let s = ppr_diffusion(&adjacency_from_edges(n, &edges).unwrap(), 0.2).unwrap();
        let oracle = ppr_series(&dense_adjacency(n, &edges), 0.2, 200);
        worst = worst.max(inf_norm(&(to_na(&s) - oracle)));
    }
    worst
}

/// Largest ∞-norm gap between the heat kernel and the eigendecomposition
/// reference, with diffusion times drawn from `[0.5, 10]`.
pub fn heat_eigen_gap(graphs: usize, max_n: usize, seed: u64) -> f64 {
    let mut rng = rng::seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..graphs {
        let n = rng.gen_range(2..=max_n);
        let t = rng.gen_range(0.5..10.0);
        let edges = random_connected(&mut rng, n, 0.2);
        let s = heat_diffusion(&adjacency_from_edges(n, &edges).unwrap(), t).unwrap();
        let oracle = heat_eigen(&dense_adjacency(n, &edges), t);
        worst = worst.max(inf_norm(&(to_na(&s) - oracle)));
    }
    worst
}

/// Largest deviation of a heat-kernel column sum from 1.
pub fn heat_column_sum_gap(graphs: usize, max_n: usize, seed: u64) -> f64 {
    let mut rng = rng::seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..graphs {
        let n = rng.gen_range(2..=max_n);
        let t = rng.gen_range(0.5..10.0);
        let edges = random_connected(&mut rng, n, 0.2);
        let s = heat_diffusion(&adjacency_from_edges(n, &edges).unwrap(), t).unwrap();
        worst = s.col_sums().iter().fold(worst, |w, c| w.max((c - 1.0).abs()));
    }
    worst
}

/// Largest deviation of a PPR row sum from 1 over circulant regular graphs.
pub fn ppr_regular_row_sum_gap(graphs: usize, max_n: usize, seed: u64) -> f64 {
    let mut rng = rng::seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..graphs {
        let n = rng.gen_range(3..=max_n);
        let half = rng.gen_range(1..=(n - 1) / 2);
        let alpha = rng.gen_range(0.05..0.95);
        let s = ppr_diffusion(&adjacency_from_edges(n, &circulant(n, half)).unwrap(), alpha).unwrap();
        worst = s.row_sums().iter().fold(worst, |w, r| w.max((r - 1.0).abs()));
    }
    worst
}

/// Loss values of the four closed-form estimator cases, as
/// `(name, computed, expected)`.
pub fn closed_form_losses() -> Vec<(&'static str, f64, f64)> {
    let first_positive = |_: usize, j: usize| {
        if j == 0 {
            MaskState::Positive
        } else {
            MaskState::Negative
        }
    };
    let jsd = mi_values(&Matrix::zeros(2, 2), &ScoreMask::diagonal(2), &Estimator::new(EstimatorKind::Jsd))
        .unwrap()
        .0;
    let nce = mi_values(
        &Matrix::zeros(1, 4),
        &ScoreMask::new(1, 4, GroupAxis::Rows, first_positive),
        &Estimator::new(EstimatorKind::Nce),
    )
    .unwrap()
    .0;
    let dv = mi_values(
        &Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]),
        &ScoreMask::diagonal(2),
        &Estimator::new(EstimatorKind::Dv),
    )
    .unwrap()
    .0;
    let ntxent = mi_values(
        &Matrix::row_vector(&[1.0, 0.0]),
        &ScoreMask::new(1, 2, GroupAxis::Rows, first_positive),
        &Estimator::with_temperature(EstimatorKind::NtXent, 1.0),
    )
    .unwrap()
    .0;
    vec![
        ("jsd", jsd, 2.0 * std::f64::consts::LN_2),
        ("nce", nce, 4f64.ln()),
        ("dv", dv, -1.0),
        ("ntxent", ntxent, (1.0 + (-1.0f64).exp()).ln()),
    ]
}

/// Graph relabeled by `perm`: new node `i` is old node `perm[i]`.
pub fn permute_edges(edges: &[(usize, usize)], perm: &[usize]) -> Edges {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    edges.iter().map(|&(u, v)| (inv[u], inv[v])).collect()
}

fn gaussian_features(rng: &mut Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0))
}

fn embed(model: &Model, n: usize, edges: &[(usize, usize)], x: &Matrix) -> (Matrix, Matrix) {
    let a = adjacency_from_edges(n, edges).unwrap();
    let views: Vec<SparseMatrix> = [ViewSpec::adjacency(), ViewSpec::ppr(0.2)]
        .iter()
        .map(|spec| build_view(&a, spec).unwrap())
        .collect();
    let batch = GraphBatch::new(&[(views.iter().collect(), x)], Pooling::Sum).unwrap();
    let e = model.embed(&batch, Default::default()).unwrap();
    (e.node, e.graph)
}

/// Largest deviation from node-permutation equivariance of node embeddings
/// and invariance of graph embeddings, over `graphs` random graphs with at
/// most `max_n` nodes and freshly initialized two-layer models.
pub fn permutation_gap(graphs: usize, max_n: usize, seed: u64) -> f64 {
    let mut rng = rng::seeded(seed);
    let mut worst: f64 = 0.0;
    for g in 0..graphs {
        let n = rng.gen_range(2..=max_n);
        let edges = random_connected(&mut rng, n, 0.3);
        let x = gaussian_features(&mut rng, n, 5);
        let config = ModelConfig {
            views: 2,
            ..ModelConfig::new(5, 8, 2)
        };
        let model = Model::new(config, seed.wrapping_add(g as u64)).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let (h, hg) = embed(&model, n, &edges, &x);
        let (hp, hgp) = embed(&model, n, &permute_edges(&edges, &perm), &x.select_rows(&perm));
        worst = worst.max(hp.max_abs_diff(&h.select_rows(&perm)));
        worst = worst.max(hgp.max_abs_diff(&hg));
    }
    worst
}

/// Whether sum readout of integer-valued layers is bit-for-bit unchanged
/// under random node permutations.
pub fn sum_readout_exactly_invariant(trials: usize, max_n: usize, seed: u64) -> bool {
    let mut rng = rng::seeded(seed);
    (0..trials).all(|_| {
        let n = rng.gen_range(1..=max_n);
        let mut ints = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.gen_range(-8..=8) as f64);
        let layers = [ints(n, 3), ints(n, 3)];
        let weight = ints(6, 4);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let pool = Arc::new(pooling_matrix(&[n], Pooling::Sum));
        let run = |zs: [Matrix; 2]| {
            let mut tape = Tape::new();
            let ids: Vec<_> = zs.into_iter().map(|z| tape.constant(z)).collect();
            let w = tape.constant(weight.clone());
            let slope = tape.constant(Matrix::scalar(0.25));
            let out = readout(&mut tape, &ids, &pool, w, slope).unwrap();
            tape.value(out).clone()
        };
        let plain = run(layers.clone());
        let shuffled = run([layers[0].select_rows(&perm), layers[1].select_rows(&perm)]);
        plain.as_slice().iter().zip(shuffled.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits())
    })
}
