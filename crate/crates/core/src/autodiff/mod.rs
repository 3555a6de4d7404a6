//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records operations as they are applied; values are computed
//! eagerly. [`Tape::backward`] then walks the tape in reverse and returns the
//! adjoint of every node that depends on a differentiable leaf.

mod gradcheck;
mod tape;

pub use gradcheck::{finite_difference_check, op_suite, op_suite_seeds, GradcheckReport, OpCheck};
pub use tape::{Gradients, NodeId, OpKind, Tape};

use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: OpKind,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("backward needs a 1x1 loss, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("{op}: row index {index} out of range for {rows} rows")]
    Gather { op: OpKind, index: usize, rows: usize },
    #[error("concat_cols needs at least one input")]
    EmptyConcat,
    #[error("node {0} is not a leaf")]
    NotLeaf(usize),
    #[error("node {0} does not belong to this tape")]
    UnknownNode(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
