//! L2-regularized multinomial logistic regression by gradient descent.

use alloc::vec::Vec;

use rand::Rng as _;

use super::EvalError;
use crate::linalg::Matrix;
use crate::math;
use crate::rng::Rng;

pub const DEFAULT_L2: f64 = 1e-4;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 5000;

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRegOptions {
    /// Penalty `λ/2·‖W‖²` on weights (biases unpenalized).
    pub l2: f64,
    /// Stop once the loss changes by less than this between iterations.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogRegOptions {
    fn default() -> Self {
        Self {
            l2: DEFAULT_L2,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticRegression {
    /// `d × k` weights.
    pub weights: Matrix,
    /// `1 × k` biases.
    pub bias: Matrix,
    pub iterations: usize,
    pub loss: f64,
}

struct Problem<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    l2: f64,
}

impl Problem<'_> {
    /// Loss and (optionally) gradient at `(w, b)`.
    fn eval(&self, w: &Matrix, b: &Matrix, grad: bool) -> (f64, Option<(Matrix, Matrix)>) {
        let m = self.x.rows() as f64;
        let mut p = self.x.matmul(w).expect("shapes fixed at fit");
        let k = p.cols();
        let mut loss = 0.0;
        for i in 0..p.rows() {
            let row = p.row_mut(i);
            for (v, &bj) in row.iter_mut().zip(b.as_slice()) {
                *v += bj;
            }
            let lse = math::log_sum_exp(row);
            loss += lse - row[self.y[i]];
            for v in row.iter_mut() {
                *v = math::exp(*v - lse);
            }
            row[self.y[i]] -= 1.0;
        }
        let reg: f64 = w.as_slice().iter().map(|v| v * v).sum();
        loss = loss / m + 0.5 * self.l2 * reg;
        if !grad {
            return (loss, None);
        }
        let mut gw = self.x.matmul_tn(&p).expect("shapes fixed at fit").scale(1.0 / m);
        gw.axpy(self.l2, w).expect("same shape");
        let gb = Matrix::from_vec(1, k, p.col_sums().into_iter().map(|v| v / m).collect())
            .expect("k entries");
        (loss, Some((gw, gb)))
    }
}

fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

impl LogisticRegression {
    /// Fits `classes`-way logistic regression from a seeded small random
    /// start with Barzilai–Borwein steps safeguarded by Armijo backtracking.
    pub fn fit(
        x: &Matrix,
        y: &[usize],
        classes: usize,
        opts: &LogRegOptions,
        rng: &mut Rng,
    ) -> Result<Self, EvalError> {
        if x.rows() != y.len() {
            return Err(EvalError::LabelCount {
                rows: x.rows(),
                labels: y.len(),
            });
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= classes) {
            return Err(EvalError::LabelOutOfRange { label: bad, classes });
        }
        let d = x.cols();
        let scale = 1.0 / math::sqrt(d.max(1) as f64);
        let mut w = Matrix::from_fn(d, classes, |_, _| rng.gen_range(-0.01..0.01) * scale);
        let mut b = Matrix::zeros(1, classes);
        let problem = Problem { x, y, l2: opts.l2 };
        let (mut f, g) = problem.eval(&w, &b, true);
        let (mut gw, mut gb) = g.expect("gradient requested");
        let mut step = 1.0;
        let mut iterations = 0;
        while iterations < opts.max_iter {
            iterations += 1;
            let gnorm2 = dot(&gw, &gw) + dot(&gb, &gb);
            if gnorm2 == 0.0 {
                break;
            }
            let mut t = step;
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACK {
                let mut w_new = w.clone();
                w_new.axpy(-t, &gw).expect("same shape");
                let mut b_new = b.clone();
                b_new.axpy(-t, &gb).expect("same shape");
                let (f_new, _) = problem.eval(&w_new, &b_new, false);
                if f_new <= f - ARMIJO_C * t * gnorm2 {
                    accepted = Some((w_new, b_new, f_new));
                    break;
                }
                t *= 0.5;
            }
            let Some((w_new, b_new, f_new)) = accepted else {
                break;
            };
            let (_, g) = problem.eval(&w_new, &b_new, true);
            let (gw_new, gb_new) = g.expect("gradient requested");
            let sw = w_new.sub(&w).expect("same shape");
            let sb = b_new.sub(&b).expect("same shape");
            let yw = gw_new.sub(&gw).expect("same shape");
            let yb = gb_new.sub(&gb).expect("same shape");
            let sy = dot(&sw, &yw) + dot(&sb, &yb);
            let ss = dot(&sw, &sw) + dot(&sb, &sb);
            step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { t * 2.0 };
            let change = (f - f_new).abs();
            w = w_new;
            b = b_new;
            gw = gw_new;
            gb = gb_new;
            f = f_new;
            if change < opts.tol {
                break;
            }
        }
        Ok(Self {
            weights: w,
            bias: b,
            iterations,
            loss: f,
        })
    }

    /// Arg-max class per row; ties go to the lowest class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>, EvalError> {
        let scores = x.matmul(&self.weights)?;
        Ok(scores
            .iter_rows()
            .map(|row| {
                let mut best = 0;
                for (j, (&v, &bj)) in row.iter().zip(self.bias.as_slice()).enumerate() {
                    if v + bj > row[best] + self.bias.as_slice()[best] {
                        best = j;
                    }
                }
                best
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn separable_one_hot() {
        let x = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]);
        let y = [0, 1, 2, 0];
        let m = LogisticRegression::fit(&x, &y, 3, &LogRegOptions::default(), &mut rng::seeded(0)).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = Matrix::from_rows(&[[0.5, -1.0], [1.5, 0.2], [-0.3, 0.8]]);
        let y = [0, 1, 1];
        let p = Problem { x: &x, y: &y, l2: 0.1 };
        let w = Matrix::from_rows(&[[0.1, -0.2], [0.3, 0.05]]);
        let b = Matrix::row_vector(&[0.2, -0.1]);
        let (_, g) = p.eval(&w, &b, true);
        let (gw, _) = g.unwrap();
        let h = 1e-6;
        for idx in 0..4 {
            let mut wp = w.clone();
            wp.as_mut_slice()[idx] += h;
            let mut wm = w.clone();
            wm.as_mut_slice()[idx] -= h;
            let fd = (p.eval(&wp, &b, false).0 - p.eval(&wm, &b, false).0) / (2.0 * h);
            assert!((fd - gw.as_slice()[idx]).abs() < 1e-8);
        }
    }
}
