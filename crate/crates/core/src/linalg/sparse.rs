use alloc::vec;
use alloc::vec::Vec;

use super::{LinalgError, Matrix};

/// Compressed sparse row matrix.
///
/// Invariants, checked by every constructor:
/// - `row_offsets.len() == n_rows + 1`, non-decreasing, last entry equals `values.len()`;
/// - column indices lie in `[0, n_cols)` and strictly increase within a row;
/// - no explicit zeros are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn try_from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        if row_offsets.len() != n_rows + 1 {
            return Err(LinalgError::InvalidCsr("row_offsets must have n_rows + 1 entries"));
        }
        if row_offsets[0] != 0 || row_offsets[n_rows] != values.len() {
            return Err(LinalgError::InvalidCsr("row_offsets must start at 0 and end at nnz"));
        }
        if col_indices.len() != values.len() {
            return Err(LinalgError::InvalidCsr("col_indices and values differ in length"));
        }
        for r in 0..n_rows {
            let (start, end) = (row_offsets[r], row_offsets[r + 1]);
            if start > end {
                return Err(LinalgError::InvalidCsr("row_offsets must be non-decreasing"));
            }
            let cols = &col_indices[start..end];
            if cols.iter().any(|&c| c >= n_cols) {
                return Err(LinalgError::InvalidCsr("column index out of range"));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LinalgError::InvalidCsr("columns must strictly increase within a row"));
            }
        }
        if values.contains(&0.0) {
            return Err(LinalgError::InvalidCsr("explicit zeros are not stored"));
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    /// Duplicate coordinates are summed; entries that end up zero are pruned.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, LinalgError> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= n_rows || c >= n_cols {
                return Err(LinalgError::OutOfBounds {
                    row: r,
                    col: c,
                    rows: n_rows,
                    cols: n_cols,
                });
            }
        }
        entries.sort_by_key(|a| (a.0, a.1));
        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut i = 0;
        while i < entries.len() {
            let (r, c, mut v) = entries[i];
            i += 1;
            while i < entries.len() && entries[i].0 == r && entries[i].1 == c {
                v += entries[i].2;
                i += 1;
            }
            if v != 0.0 {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
            }
        }
        for r in 0..n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Sparse encoding of a dense matrix, dropping exact zeros.
    pub fn from_dense(m: &Matrix) -> Self {
        let mut row_offsets = Vec::with_capacity(m.rows() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for r in m.iter_rows() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self {
            n_rows: m.rows(),
            n_cols: m.cols(),
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    /// Number of stored entries in row `i`.
    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (r, c, v) in self.iter() {
            let k = next[c];
            col_indices[k] = r;
            values[k] = v;
            next[c] += 1;
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Multiplies every stored value by `row_scale[r] * col_scale[c]`.
    pub fn scale_rows_cols(&self, row_scale: &[f64], col_scale: &[f64]) -> SparseMatrix {
        let mut out = self.clone();
        for (r, &rs) in row_scale.iter().enumerate().take(self.n_rows) {
            let (s, e) = (self.row_offsets[r], self.row_offsets[r + 1]);
            for k in s..e {
                out.values[k] *= rs * col_scale[self.col_indices[k]];
            }
        }
        out
    }

    /// Sparse times dense: `self * x`.
    pub fn spmm(&self, x: &Matrix) -> Result<Matrix, LinalgError> {
        if self.n_cols != x.rows() {
            return Err(LinalgError::ShapeMismatch {
                op: "spmm",
                left: self.shape(),
                right: x.shape(),
            });
        }
        let d = x.cols();
        let mut out = Matrix::zeros(self.n_rows, d);
        if d == 0 {
            return Ok(out);
        }
        let kernel = |(r, out_row): (usize, &mut [f64])| {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, &xv) in out_row.iter_mut().zip(x.row(c)) {
                    *o += v * xv;
                }
            }
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            if self.nnz() * d > 1 << 16 {
                out.as_mut_slice().par_chunks_mut(d).enumerate().for_each(kernel);
                return Ok(out);
            }
        }
        out.as_mut_slice().chunks_mut(d).enumerate().for_each(kernel);
        Ok(out)
    }

    /// `self^T * x` by scattering rows, without building the transpose.
    pub fn spmm_transpose(&self, x: &Matrix) -> Result<Matrix, LinalgError> {
        if self.n_rows != x.rows() {
            return Err(LinalgError::ShapeMismatch {
                op: "spmm_transpose",
                left: (self.n_cols, self.n_rows),
                right: x.shape(),
            });
        }
        let d = x.cols();
        let mut out = Matrix::zeros(self.n_cols, d);
        if d == 0 {
            return Ok(out);
        }
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let x_row = x.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, &xv) in out.row_mut(c).iter_mut().zip(x_row) {
                    *o += v * xv;
                }
            }
        }
        Ok(out)
    }

    /// Principal submatrix on `nodes` (unique, in range), re-indexed in the
    /// given order.
    pub fn submatrix(&self, nodes: &[usize]) -> Result<SparseMatrix, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                op: "submatrix",
                rows: self.n_rows,
                cols: self.n_cols,
            });
        }
        let n = self.n_rows;
        let mut new_index = vec![usize::MAX; n];
        for (k, &v) in nodes.iter().enumerate() {
            if v >= n {
                return Err(LinalgError::OutOfBounds {
                    row: v,
                    col: v,
                    rows: n,
                    cols: n,
                });
            }
            if new_index[v] != usize::MAX {
                return Err(LinalgError::InvalidCsr("duplicate node in submatrix selection"));
            }
            new_index[v] = k;
        }
        let sorted = nodes.windows(2).all(|w| w[0] < w[1]);
        let mut row_offsets = Vec::with_capacity(nodes.len() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for &v in nodes {
            let (cols, vals) = self.row(v);
            let start = col_indices.len();
            for (&c, &x) in cols.iter().zip(vals) {
                let k = new_index[c];
                if k != usize::MAX {
                    col_indices.push(k);
                    values.push(x);
                }
            }
            if !sorted {
                // Re-indexed columns are out of order; restore the CSR invariant.
                let mut pairs: Vec<(usize, f64)> = col_indices[start..]
                    .iter()
                    .copied()
                    .zip(values[start..].iter().copied())
                    .collect();
                pairs.sort_by_key(|p| p.0);
                for (slot, (c, x)) in pairs.into_iter().enumerate() {
                    col_indices[start + slot] = c;
                    values[start + slot] = x;
                }
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix::try_from_csr(nodes.len(), nodes.len(), row_offsets, col_indices, values)
    }

    /// Block-diagonal stacking of square blocks.
    pub fn block_diagonal(blocks: &[&SparseMatrix]) -> SparseMatrix {
        let n: usize = blocks.iter().map(|b| b.n_rows).sum();
        let m: usize = blocks.iter().map(|b| b.n_cols).sum();
        let nnz: usize = blocks.iter().map(|b| b.nnz()).sum();
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        let mut col_base = 0;
        for b in blocks {
            for r in 0..b.n_rows {
                let (cols, vals) = b.row(r);
                col_indices.extend(cols.iter().map(|c| c + col_base));
                values.extend_from_slice(vals);
                row_offsets.push(col_indices.len());
            }
            col_base += b.n_cols;
        }
        SparseMatrix {
            n_rows: n,
            n_cols: m,
            row_offsets,
            col_indices,
            values,
        }
    }
}
