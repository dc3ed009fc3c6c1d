//! Stochastic-gradient MCMC with a lattice random walk discretisation.
//!
//! This crate implements three one-step update rules for posterior sampling —
//! SGLD (Euler–Maruyama with minibatch gradients), SGLRW (a lattice random
//! walk whose coordinates move by exactly ±√(2δ) with gradient-tilted sign
//! probabilities), and componentwise clipped SGLD — together with the target
//! models, noise generators, and moment-level diagnostics needed to compare
//! them, and a CLI harness that drives the desk-scale experiments and emits
//! deterministic CSV.
//!
//! Entry points:
//! - [`samplers`] — update rules and chain drivers,
//! - [`models`] — linear-Gaussian, logistic, and 1-D mixture targets,
//! - [`diagnostics`] — posterior summaries, Gaussian KL, and the second/
//!   third-moment error oracles,
//! - [`harness`] — experiment configuration, presets, and CSV output.

pub mod diagnostics;
pub mod harness;
pub mod models;
pub mod noise;
pub mod samplers;
pub mod schedule;
pub mod stream;

mod params;

pub use params::ParamVector;

use thiserror::Error;

/// Errors produced by numeric operations in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index {index} out of range for dataset of size {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("minibatch is empty")]
    EmptyBatch,
    #[error("batch size {batch} exceeds dataset size {data}")]
    BatchTooLarge { batch: usize, data: usize },
    #[error("stability index alpha must lie in (0, 2], got {0}")]
    InvalidAlpha(f64),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("covariance is singular even after jitter")]
    SingularCovariance,
    #[error("matrix shapes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("lattice probabilities are clipped for these inputs; the expansion is invalid")]
    ClippedRegime,
    #[error("analytic posterior solve failed: residual {0} exceeds 1e-8")]
    PosteriorSolveFailed(f64),
    #[error("reference chain diverged at iteration {0}; decrease fine_step")]
    ReferenceDiverged(u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty sample set")]
    EmptySamples,
}

pub type Result<T> = std::result::Result<T, Error>;
