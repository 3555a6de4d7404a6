use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::index::sample;
use rand::Rng as _;

use super::{AutodiffError, NodeId, OpKind, Tape};
use crate::linalg::{Matrix, SparseMatrix};
use crate::rng::{self, Rng};

/// Coordinates sampled per differentiable leaf.
const MAX_COORDS: usize = 64;

/// Central-difference check of every differentiable leaf feeding `loss`.
///
/// `fd` is the Richardson extrapolation `(4·D(ε/2) − D(ε)) / 3` of central
/// differences `D(h) = (f(x+h) − f(x−h)) / 2h`, accurate to O(ε⁴).
/// Returns the largest `|ad − fd| / max(1e-12, |ad| + |fd|)` over up to 64
/// sampled coordinates per leaf. Leaf values are restored afterwards.
pub fn finite_difference_check(
    tape: &mut Tape,
    loss: NodeId,
    eps: f64,
    seed: u64,
) -> Result<f64, AutodiffError> {
    let grads = tape.backward(loss)?;
    let leaves: Vec<NodeId> = (0..=loss.index())
        .map(NodeId)
        .filter(|&id| tape.kind(id) == OpKind::Leaf && tape.requires_grad(id))
        .collect();
    let mut rng = rng::seeded(seed);
    let mut worst: f64 = 0.0;
    for leaf in leaves {
        let original = tape.value(leaf).clone();
        let analytic = grads.get_or_zeros(leaf, original.shape());
        let len = original.len();
        let coords: Vec<usize> = if len <= MAX_COORDS {
            (0..len).collect()
        } else {
            sample(&mut rng, len, MAX_COORDS).into_vec()
        };
        for c in coords {
            let probe = |delta: f64, tape: &mut Tape| -> Result<f64, AutodiffError> {
                let mut v = original.clone();
                v.as_mut_slice()[c] += delta;
                tape.set_value(leaf, v)?;
                tape.forward()?;
                Ok(tape.value(loss).as_slice()[0])
            };
            let wide = (probe(eps, tape)? - probe(-eps, tape)?) / (2.0 * eps);
            let narrow = (probe(eps / 2.0, tape)? - probe(-eps / 2.0, tape)?) / eps;
            let fd = (4.0 * narrow - wide) / 3.0;
            let ad = analytic.as_slice()[c];
            worst = worst.max(relative_error(ad, fd));
        }
        tape.set_value(leaf, original)?;
    }
    tape.forward()?;
    Ok(worst)
}

pub(crate) fn relative_error(ad: f64, fd: f64) -> f64 {
    (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-12)
}

/// Worst relative error of one operation across seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct OpCheck {
    pub op: OpKind,
    pub cases: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradcheckReport {
    pub checks: Vec<OpCheck>,
}

impl GradcheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.checks.iter().map(|c| c.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.checks.iter().all(|c| c.max_rel_err <= tol)
    }
}

fn dim(rng: &mut Rng) -> usize {
    rng.gen_range(2..=8)
}

/// Uniform in ±[1e-3, scale], keeping inputs off the PReLU kink.
fn away_from_zero(rng: &mut Rng, scale: f64) -> f64 {
    let m = rng.gen_range(1e-3..scale);
    if rng.gen_bool(0.5) {
        m
    } else {
        -m
    }
}

fn random_matrix(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| away_from_zero(rng, scale))
}

fn random_sparse(rng: &mut Rng, rows: usize, cols: usize) -> SparseMatrix {
    let mut triplets = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if rng.gen_bool(0.4) {
                triplets.push((r, c, rng.gen_range(0.1..1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(rows, cols, triplets).expect("indices in range")
}

/// Builds `sum(R ⊙ op(inputs))` for one operation with random shapes.
fn build_case(op: OpKind, rng: &mut Rng, tape: &mut Tape) -> Result<NodeId, AutodiffError> {
    let (n, m, k) = (dim(rng), dim(rng), dim(rng));
    let param = |tape: &mut Tape, rng: &mut Rng, r: usize, c: usize| {
        tape.parameter(random_matrix(rng, r, c, 2.0))
    };
    let out = match op {
        OpKind::Leaf => return Err(AutodiffError::NotLeaf(0)),
        OpKind::MatMul => {
            let a = param(tape, rng, n, m);
            let b = param(tape, rng, m, k);
            tape.matmul(a, b)?
        }
        OpKind::Spmm => {
            let s = Arc::new(random_sparse(rng, n, m));
            let x = param(tape, rng, m, k);
            tape.spmm(s, x)?
        }
        OpKind::Add => {
            let a = param(tape, rng, n, m);
            let b = param(tape, rng, n, m);
            tape.add(a, b)?
        }
        OpKind::AddBiasRow => {
            let x = param(tape, rng, n, m);
            let b = param(tape, rng, 1, m);
            tape.add_bias_row(x, b)?
        }
        OpKind::Prelu => {
            let x = param(tape, rng, n, m);
            let a = tape.parameter(Matrix::scalar(rng.gen_range(0.05..0.5)));
            tape.prelu(x, a)?
        }
        OpKind::Sigmoid => {
            let x = param(tape, rng, n, m);
            tape.sigmoid(x)?
        }
        OpKind::Softplus => {
            let x = param(tape, rng, n, m);
            tape.softplus(x)?
        }
        OpKind::LogSumExpRows => {
            let x = param(tape, rng, n, m);
            tape.log_sum_exp_rows(x)?
        }
        OpKind::ConcatCols => {
            let a = param(tape, rng, n, m);
            let b = param(tape, rng, n, k);
            tape.concat_cols(&[a, b])?
        }
        OpKind::SumRows => {
            let x = param(tape, rng, n, m);
            tape.sum_rows(x)?
        }
        OpKind::Scale => {
            let x = param(tape, rng, n, m);
            tape.scale(x, away_from_zero(rng, 3.0))?
        }
        OpKind::Transpose => {
            let x = param(tape, rng, n, m);
            tape.transpose(x)?
        }
        OpKind::RowGather => {
            let x = param(tape, rng, n, m);
            let idx = (0..k).map(|_| rng.gen_range(0..n)).collect();
            tape.row_gather(x, idx)?
        }
        OpKind::ElementwiseMul => {
            let a = param(tape, rng, n, m);
            let b = param(tape, rng, n, m);
            tape.elementwise_mul(a, b)?
        }
        OpKind::NormalizeRows => {
            let x = param(tape, rng, n, m);
            tape.normalize_rows(x)?
        }
    };
    let (r, c) = tape.shape(out);
    let weights = tape.constant(random_matrix(rng, r, c, 1.0));
    let weighted = tape.elementwise_mul(out, weights)?;
    tape.sum_all(weighted)
}

/// Finite-difference check of every operation over `seeds` random cases.
pub fn op_suite(seeds: u64, eps: f64) -> Result<GradcheckReport, AutodiffError> {
    op_suite_seeds(0..seeds, eps)
}

/// [`op_suite`] over an explicit seed range.
pub fn op_suite_seeds(seeds: Range<u64>, eps: f64) -> Result<GradcheckReport, AutodiffError> {
    let mut checks = Vec::new();
    for (k, op) in OpKind::OPS.into_iter().enumerate() {
        let mut worst: f64 = 0.0;
        for seed in seeds.clone() {
            let mut rng = rng::derive(seed, k as u64);
            let mut tape = Tape::new();
            let loss = build_case(op, &mut rng, &mut tape)?;
            worst = worst.max(finite_difference_check(&mut tape, loss, eps, seed)?);
        }
        checks.push(OpCheck {
            op,
            cases: seeds.clone().count(),
            max_rel_err: worst,
        });
    }
    Ok(GradcheckReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_loss_is_exact() {
        let mut t = Tape::new();
        let w = t.parameter(Matrix::row_vector(&[0.3, -1.2, 2.5]));
        let x = t.constant(Matrix::from_rows(&[[1.5], [0.7], [-2.0]]));
        let l = t.matmul(w, x).unwrap();
        assert!(finite_difference_check(&mut t, l, 1e-5, 0).unwrap() <= 1e-10);
    }

    #[test]
    fn prelu_slope_on_mixed_signs() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::row_vector(&[-1.5, 0.8, -0.3, 2.0]));
        let a = t.parameter(Matrix::scalar(0.25));
        let y = t.prelu(x, a).unwrap();
        let sq = t.elementwise_mul(y, y).unwrap();
        let l = t.sum_all(sq).unwrap();
        assert!(finite_difference_check(&mut t, l, 1e-6, 0).unwrap() <= 1e-6);
    }

    #[test]
    fn every_op_passes_a_few_seeds() {
        let report = op_suite(5, 1e-6).unwrap();
        for c in &report.checks {
            assert!(c.max_rel_err <= 1e-5, "{}: {}", c.op, c.max_rel_err);
        }
    }
}
