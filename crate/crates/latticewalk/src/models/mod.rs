//! Target posterior models.
//!
//! Every sampler in this crate drives the negative log-posterior
//! U(θ) = −log p(θ) − Σᵢ log p(yᵢ|xᵢ,θ). Models expose the prior and
//! per-datum log-gradients separately so the minibatch estimator can rescale
//! the data term, plus U itself for finite-difference oracles.

mod linear;
mod loader;
mod logistic;
mod mixture;

pub use linear::LinearGaussianModel;
pub use loader::load_numeric_matrix;
pub use logistic::LogisticModel;
pub use mixture::{mixture1d_gradient, Mixture1DModel};

use crate::{Error, ParamVector, Result};
use nalgebra::{DMatrix, DVector};

/// A Bayesian target with factored prior × likelihood structure.
pub trait TargetModel: Sync {
    /// Parameter dimension d.
    fn dim(&self) -> usize;

    /// Dataset size N (0 for synthetic targets without data terms).
    fn data_len(&self) -> usize;

    /// Adds ∇ log p(θ) to `acc`.
    fn accumulate_prior_log_grad(&self, params: &[f64], acc: &mut [f64]);

    /// Adds `scale` · ∇ log p(y_index | x_index, θ) to `acc`.
    fn accumulate_datum_log_grad(&self, params: &[f64], index: usize, scale: f64, acc: &mut [f64]);

    /// U(θ) = −log p(θ) − Σᵢ log p(yᵢ|xᵢ,θ), up to θ-independent constants.
    fn neg_log_posterior(&self, params: &[f64]) -> f64;

    /// log p(y_index | x_index, θ), up to θ-independent constants.
    fn datum_log_lik(&self, params: &[f64], index: usize) -> f64;

    /// Writes ∇U(θ) into `out`, composed term by term from the prior and
    /// per-datum gradients. Exactly matches the minibatch estimator with the
    /// full index set.
    fn full_grad_into(&self, params: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.accumulate_prior_log_grad(params, out);
        for index in 0..self.data_len() {
            self.accumulate_datum_log_grad(params, index, 1.0, out);
        }
        for v in out.iter_mut() {
            *v = -*v;
        }
    }

    /// Writes ∇U(θ) into `out` by the cheapest available route. Models with
    /// sufficient statistics (e.g. a precomputed Gram matrix) override this;
    /// the result agrees with [`full_grad_into`] to rounding, not bitwise.
    fn fast_full_grad_into(&self, params: &[f64], out: &mut [f64]) {
        self.full_grad_into(params, out);
    }
}

/// Returns ∇U(θ) over the full dataset.
pub fn full_gradient(model: &dyn TargetModel, params: &ParamVector) -> Result<ParamVector> {
    check_dim(model, params)?;
    let mut out = ParamVector::zeros(model.dim());
    model.full_grad_into(params, out.as_mut_slice());
    Ok(out)
}

/// Returns ∇ log p(y_index | x_index, θ) for a single datum.
pub fn per_datum_gradient(
    model: &dyn TargetModel,
    params: &ParamVector,
    index: usize,
) -> Result<ParamVector> {
    check_dim(model, params)?;
    if index >= model.data_len() {
        return Err(Error::IndexOutOfRange {
            index,
            len: model.data_len(),
        });
    }
    let mut out = ParamVector::zeros(model.dim());
    model.accumulate_datum_log_grad(params, index, 1.0, out.as_mut_slice());
    Ok(out)
}

fn check_dim(model: &dyn TargetModel, params: &ParamVector) -> Result<()> {
    if params.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: params.dim(),
        });
    }
    Ok(())
}

/// Gaussian summary (μ, Σ): analytic posteriors and empirical fits.
#[derive(Clone, Debug)]
pub struct GaussianSummary {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianSummary {
    /// Builds a summary, rejecting asymmetric covariance input.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::ShapeMismatch(
                covariance.nrows(),
                covariance.ncols(),
                d,
                d,
            ));
        }
        let scale = covariance.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            for j in (i + 1)..d {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-10 * scale.max(1e-300) {
                    return Err(Error::InvalidParameter(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(GaussianSummary { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}
