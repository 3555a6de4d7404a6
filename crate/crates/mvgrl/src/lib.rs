//! File formats, configuration, checkpoints, run manifests and the command
//! line for the `mvgrl-core` pipeline.
//!
//! - [`io`]: TU graph-classification directories, node bundles, CSV tables
//!   and COO view files.
//! - [`config`]: `key = value` and JSON training configurations.
//! - [`checkpoint`]: the binary model checkpoint format.
//! - [`manifest`]: run manifests and dataset fingerprints.
//! - [`cli`]: the `mvgrl` subcommands.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod io;
pub mod manifest;

pub use mvgrl_core as core;
