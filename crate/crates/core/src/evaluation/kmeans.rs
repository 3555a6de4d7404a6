//! Lloyd's k-means with k-means++ seeding.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::EvalError;
use crate::linalg::Matrix;
use crate::rng::Rng;

pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centroids: Matrix,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid; ties go to the lowest index.
fn nearest(row: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter_rows().enumerate() {
        let d = sq_dist(row, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn distinct_rows(x: &Matrix, cap: usize) -> usize {
    let mut seen: Vec<&[f64]> = Vec::new();
    for r in x.iter_rows() {
        if !seen.contains(&r) {
            seen.push(r);
            if seen.len() >= cap {
                break;
            }
        }
    }
    seen.len()
}

/// k-means++: first centre uniform, later ones with probability
/// proportional to squared distance from the nearest chosen centre.
pub fn plus_plus(x: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = x.rows();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = x.iter_rows().map(|r| sq_dist(r, x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        chosen.push(next);
        for (d, r) in d2.iter_mut().zip(x.iter_rows()) {
            *d = d.min(sq_dist(r, x.row(next)));
        }
    }
    x.select_rows(&chosen)
}

impl KMeans {
    /// One seeded run: k-means++ then Lloyd iterations until assignments
    /// stop changing or `max_iter` is reached. An emptied cluster moves to
    /// the point farthest from its centroid.
    pub fn fit(x: &Matrix, k: usize, max_iter: usize, rng: &mut Rng) -> Result<Self, EvalError> {
        if k == 0 || distinct_rows(x, k) < k {
            return Err(EvalError::TooFewDistinctPoints { k });
        }
        let (n, d) = x.shape();
        let mut centroids = plus_plus(x, k, rng);
        let mut assignment = vec![usize::MAX; n];
        let mut iterations = 0;
        loop {
            let mut changed = false;
            let mut far = (0, -1.0);
            for (i, row) in x.iter_rows().enumerate() {
                let (c, dist) = nearest(row, &centroids);
                if assignment[i] != c {
                    assignment[i] = c;
                    changed = true;
                }
                if dist > far.1 {
                    far = (i, dist);
                }
            }
            if !changed || iterations >= max_iter {
                break;
            }
            iterations += 1;
            let mut sums = Matrix::zeros(k, d);
            let mut counts = vec![0usize; k];
            for (row, &c) in x.iter_rows().zip(&assignment) {
                counts[c] += 1;
                for (s, &v) in sums.row_mut(c).iter_mut().zip(row) {
                    *s += v;
                }
            }
            for c in 0..k {
                if counts[c] == 0 {
                    centroids.row_mut(c).copy_from_slice(x.row(far.0));
                } else {
                    let inv = 1.0 / counts[c] as f64;
                    for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                        *dst = s * inv;
                    }
                }
            }
        }
        let inertia = x
            .iter_rows()
            .zip(&assignment)
            .map(|(r, &c)| sq_dist(r, centroids.row(c)))
            .sum();
        Ok(Self {
            centroids,
            assignment,
            inertia,
            iterations,
        })
    }
}
