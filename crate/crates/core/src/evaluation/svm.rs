//! Linear SVM trained by deterministic full-batch sub-gradient descent.

use alloc::vec;
use alloc::vec::Vec;

use super::EvalError;
use crate::linalg::Matrix;
use crate::math;

pub const DEFAULT_SVM_ITERATIONS: usize = 500;

/// One-vs-rest linear SVM; the bias is an extra regularized weight on a
/// constant feature.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSvm {
    /// One `d + 1` weight vector per class (a single one for two classes).
    pub weights: Vec<Vec<f64>>,
    pub classes: usize,
}

/// Minimizes `λ/2·‖w‖² + mean_i max(0, 1 − y_i·w·x̃_i)` with `λ = 1/(C·m)`
/// (the scaling of `½‖w‖² + C·Σ hinge`). Steps `1/(λt)` with projection
/// onto the ball of radius `1/√λ`; returns the average of the second half
/// of the iterates.
fn train_binary(x: &Matrix, y: &[f64], c: f64, iterations: usize) -> Vec<f64> {
    let (m, d) = x.shape();
    let lambda = 1.0 / (c * m as f64);
    let radius = 1.0 / math::sqrt(lambda);
    let mut w = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let mut grad = vec![0.0; d + 1];
    let start = iterations / 2;
    for t in 1..=iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (row, &yi) in x.iter_rows().zip(y) {
            let margin = yi * (row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[d]);
            if margin < 1.0 {
                for (g, &a) in grad.iter_mut().zip(row) {
                    *g -= yi * a;
                }
                grad[d] -= yi;
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        let inv_m = 1.0 / m as f64;
        for (wj, gj) in w.iter_mut().zip(&grad) {
            *wj -= eta * (lambda * *wj + gj * inv_m);
        }
        let norm = math::sqrt(w.iter().map(|v| v * v).sum());
        if norm > radius {
            let s = radius / norm;
            w.iter_mut().for_each(|v| *v *= s);
        }
        if t > start {
            for (a, &v) in avg.iter_mut().zip(&w) {
                *a += v;
            }
        }
    }
    let count = (iterations - start).max(1) as f64;
    avg.iter_mut().for_each(|a| *a /= count);
    avg
}

fn decision(w: &[f64], row: &[f64]) -> f64 {
    let d = row.len();
    row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + w[d]
}

impl LinearSvm {
    pub fn fit(x: &Matrix, y: &[usize], classes: usize, c: f64, iterations: usize) -> Result<Self, EvalError> {
        if x.rows() != y.len() {
            return Err(EvalError::LabelCount {
                rows: x.rows(),
                labels: y.len(),
            });
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(EvalError::BadParameter("C must be positive"));
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= classes) {
            return Err(EvalError::LabelOutOfRange { label: bad, classes });
        }
        let targets: Vec<usize> = if classes == 2 { vec![1] } else { (0..classes).collect() };
        let weights = targets
            .iter()
            .map(|&k| {
                let signs: Vec<f64> = y.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
                train_binary(x, &signs, c, iterations)
            })
            .collect();
        Ok(Self { weights, classes })
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        x.iter_rows()
            .map(|row| {
                if self.classes == 2 {
                    usize::from(decision(&self.weights[0], row) > 0.0)
                } else {
                    let mut best = 0;
                    let mut best_v = f64::NEG_INFINITY;
                    for (k, w) in self.weights.iter().enumerate() {
                        let v = decision(w, row);
                        if v > best_v {
                            best = k;
                            best_v = v;
                        }
                    }
                    best
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::metrics::accuracy;

    #[test]
    fn separates_two_blobs() {
        let x = Matrix::from_rows(&[[2.0, 1.0], [1.5, 2.0], [2.5, 1.8], [-2.0, -1.0], [-1.0, -2.5], [-2.2, -1.1]]);
        let y = [1, 1, 1, 0, 0, 0];
        let svm = LinearSvm::fit(&x, &y, 2, 1.0, 500).unwrap();
        assert_eq!(accuracy(&svm.predict(&x), &y), 1.0);
    }

    #[test]
    fn three_class_one_vs_rest() {
        let x = Matrix::from_rows(&[[3.0, 0.0], [2.5, 0.3], [0.0, 3.0], [0.2, 2.6], [-3.0, -3.0], [-2.5, -2.8]]);
        let y = [0, 0, 1, 1, 2, 2];
        let svm = LinearSvm::fit(&x, &y, 3, 10.0, 500).unwrap();
        assert_eq!(svm.predict(&x), y);
    }
}
