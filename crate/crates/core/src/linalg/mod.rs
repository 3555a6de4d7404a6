//! Dense and sparse real matrices.

mod dense;
mod lu;
mod sparse;

pub use dense::Matrix;
pub use lu::{lu_inverse, LuFactors};
pub use sparse::SparseMatrix;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: expected a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("buffer of length {len} does not fill a {rows}x{cols} matrix")]
    BadBuffer { rows: usize, cols: usize, len: usize },
    #[error("invalid CSR structure: {0}")]
    InvalidCsr(&'static str),
    #[error("index ({row}, {col}) out of bounds for {rows}x{cols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is singular to working precision (pivot {pivot} at column {col})")]
    Singular { col: usize, pivot: f64 },
}
