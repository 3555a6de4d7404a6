use alloc::vec::Vec;

use super::{LinalgError, Matrix};

/// LU factorization with partial pivoting, `P A = L U`, stored packed.
#[derive(Clone, Debug)]
pub struct LuFactors {
    lu: Matrix,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &Matrix) -> Result<Self, LinalgError> {
        let n = a.rows();
        if a.cols() != n {
            return Err(LinalgError::NotSquare {
                op: "lu",
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (mut p, mut best) = (k, lu[(k, k)].abs());
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    p = i;
                    best = v;
                }
            }
            if best <= scale * f64::EPSILON * n as f64 {
                return Err(LinalgError::Singular { col: k, pivot: best });
            }
            if p != k {
                perm.swap(p, k);
                let data = lu.as_mut_slice();
                for j in 0..n {
                    data.swap(k * n + j, p * n + j);
                }
            }
            let pivot = lu[(k, k)];
            let data = lu.as_mut_slice();
            let (upper, lower) = data.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n..(k + 1) * n];
            for row in lower.chunks_mut(n) {
                let factor = row[k] / pivot;
                row[k] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        row[j] -= factor * pivot_row[j];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    /// Solves `A X = B` for a dense right-hand side.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix, LinalgError> {
        let n = self.lu.rows();
        if b.rows() != n {
            return Err(LinalgError::ShapeMismatch {
                op: "lu_solve",
                left: self.lu.shape(),
                right: b.shape(),
            });
        }
        let m = b.cols();
        let mut x = b.select_rows(&self.perm);
        // Forward substitution with unit-diagonal L, row operations on X.
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                if l != 0.0 {
                    let (head, tail) = x.as_mut_slice().split_at_mut(i * m);
                    let src = &head[k * m..(k + 1) * m];
                    for (t, s) in tail[..m].iter_mut().zip(src) {
                        *t -= l * s;
                    }
                }
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let u = self.lu[(i, k)];
                if u != 0.0 {
                    let (head, tail) = x.as_mut_slice().split_at_mut(k * m);
                    let dst = &mut head[i * m..(i + 1) * m];
                    for (d, s) in dst.iter_mut().zip(&tail[..m]) {
                        *d -= u * s;
                    }
                }
            }
            let d = self.lu[(i, i)];
            for v in x.row_mut(i) {
                *v /= d;
            }
        }
        Ok(x)
    }
}

/// Dense inverse through LU with partial pivoting.
pub fn lu_inverse(a: &Matrix) -> Result<Matrix, LinalgError> {
    LuFactors::factor(a)?.solve(&Matrix::identity(a.rows()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_2x2() {
        let a = Matrix::from_rows(&[[4.0, 7.0], [2.0, 6.0]]);
        let inv = lu_inverse(&a).unwrap();
        let expected = Matrix::from_rows(&[[0.6, -0.7], [-0.2, 0.4]]);
        assert!(inv.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn needs_pivoting() {
        let a = Matrix::from_rows(&[[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [4.0, -3.0, 8.0]]);
        let inv = lu_inverse(&a).unwrap();
        let id = a.matmul(&inv).unwrap();
        assert!(id.max_abs_diff(&Matrix::identity(3)) < 1e-13);
    }

    #[test]
    fn singular_is_an_error() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(lu_inverse(&a), Err(LinalgError::Singular { .. })));
    }
}
