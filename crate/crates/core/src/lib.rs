//! Masked autoencoding for multivariate time series, where a fully
//! connected interpolator restores the latent codes of masked patches
//! instead of learned mask tokens.
//!
//! The pipeline is encoder (stacked GRU over visible patches) →
//! interpolator (dense layers over a zero-filled latent grid plus a
//! visibility indicator) → decoder (stacked GRU over all slots).

pub mod autodiff;
pub mod data;
mod error;
pub mod eval;
pub mod exec;
pub mod generate;
pub mod model;
pub mod train;

pub use error::{Error, Result};
pub use exec::Execution;

/// Generator used everywhere randomness is consumed.
pub type SeededRng = rand_chacha::ChaCha8Rng;
