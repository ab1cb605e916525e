//! Linear forecasting with a cross-variable convolution embedding.
//!
//! The forecaster normalizes each window per variable, mixes the variables
//! with a single 1D convolution blended residually with the raw target
//! series, cuts the result into patches, projects them with a shared linear
//! map plus positional embedding, and maps the flattened patches to the
//! horizon before undoing the normalization.
//!
//! - [`ndgrad`]: dense tensors and a reverse-mode autodiff tape.
//! - [`layers`]: normalization, the cross-variable embedding, patching and head.
//! - [`model`]: the assembled forecaster, a linear host with the embedding
//!   as a plug-in, losses and metrics.
//! - [`data`]: CSV ingestion, chronological splits, windows, masking and a
//!   synthetic exogenous-driven generator.
//! - [`train`]: Adam, the training loop, evaluation and checkpoints.
//! - [`cli`]: run configuration and the commands behind the binary.

pub mod cli;
pub mod data;
pub mod error;
pub mod layers;
pub mod model;
pub mod ndgrad;
pub mod train;

pub use error::{Error, Result};
