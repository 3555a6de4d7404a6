//! Contrastive multi-view representation learning on graphs.
//!
//! The crate is `no_std` (with `alloc`) and holds every numerical piece of
//! the pipeline:
//!
//! - [`linalg`]: dense row-major and CSR sparse matrices, LU inversion.
//! - [`graph`]: attributed graphs, adjacency normalization, sub-sampling,
//!   feature initialization.
//! - [`diffusion`]: PPR / heat closed forms, the generalized diffusion
//!   series, the shortest-path distance view and sparsification.
//! - [`autodiff`]: a small reverse-mode tape over dense matrices.
//! - [`model`]: per-view GCN encoders, projection heads, readout and
//!   discriminator.
//! - [`objectives`]: contrastive score matrices and the JSD / InfoNCE /
//!   NT-Xent / DV mutual-information estimators.
//! - [`training`]: Adam, early stopping and the end-to-end training loop.
//! - [`evaluation`]: linear probe, cross-validated linear SVM, K-means with
//!   NMI / ARI.
//!
//! File formats, configuration parsing and the command line live in the
//! companion `mvgrl` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod diffusion;
pub mod evaluation;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod objectives;
pub mod rng;
pub mod training;

mod math;

pub use graph::{AttributedGraph, GraphCollection, Split};
pub use linalg::{Matrix, SparseMatrix};
