//! Linear-Gaussian regression with a closed-form posterior.

use super::{GaussianSummary, TargetModel};
use crate::stream::ChainRng;
use crate::{Error, ParamVector, Result};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// y = Xθ + ε with ε ~ N(0, σ²I) and prior p(θ) = N(0, τ⁻¹I).
///
/// The Gram matrix XᵀX and Xᵀy are precomputed so the full-batch gradient
/// costs O(d²) regardless of N.
pub struct LinearGaussianModel {
    rows: Vec<f64>, // N×d, row-major
    targets: Vec<f64>,
    n: usize,
    d: usize,
    noise_variance: f64,
    prior_precision: f64,
    gram: Vec<f64>, // XᵀX, d×d row-major
    xty: Vec<f64>,  // Xᵀy
}

impl LinearGaussianModel {
    pub fn new(
        rows: Vec<f64>,
        targets: Vec<f64>,
        d: usize,
        noise_variance: f64,
        prior_precision: f64,
    ) -> Result<Self> {
        if d == 0 || rows.len() % d != 0 {
            return Err(Error::InvalidParameter(
                "design matrix length must be a multiple of d".into(),
            ));
        }
        let n = rows.len() / d;
        if targets.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: targets.len(),
            });
        }
        if !(noise_variance > 0.0) || !(prior_precision > 0.0) {
            return Err(Error::InvalidParameter(
                "noise_variance and prior_precision must be positive".into(),
            ));
        }
        if rows.iter().any(|v| !v.is_finite()) || targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite data entry".into()));
        }
        let mut gram = vec![0.0; d * d];
        let mut xty = vec![0.0; d];
        for i in 0..n {
            let row = &rows[i * d..(i + 1) * d];
            for a in 0..d {
                xty[a] += row[a] * targets[i];
                for b in 0..d {
                    gram[a * d + b] += row[a] * row[b];
                }
            }
        }
        Ok(LinearGaussianModel {
            rows,
            targets,
            n,
            d,
            noise_variance,
            prior_precision,
            gram,
            xty,
        })
    }

    /// Draws θ* ~ N(0, I), rows of X ~ N(0, I), y = Xθ* + σε.
    pub fn synthetic(
        n: usize,
        d: usize,
        noise_variance: f64,
        prior_precision: f64,
        rng: &mut ChainRng,
    ) -> Result<(Self, ParamVector)> {
        let sigma = noise_variance.sqrt();
        let theta_star: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut rows = vec![0.0; n * d];
        for v in rows.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut targets = vec![0.0; n];
        for i in 0..n {
            let row = &rows[i * d..(i + 1) * d];
            let mean: f64 = row.iter().zip(&theta_star).map(|(a, b)| a * b).sum();
            targets[i] = mean + sigma * rng.sample::<f64, _>(StandardNormal);
        }
        let model = Self::new(rows, targets, d, noise_variance, prior_precision)?;
        Ok((model, ParamVector::from_vec(theta_star)))
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn prior_precision(&self) -> f64 {
        self.prior_precision
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    /// Exact posterior N(μ, Σ) with Σ⁻¹ = XᵀX/σ² + τI and μ = ΣXᵀy/σ².
    ///
    /// Fails if the solve residual ‖Σ⁻¹μ − Xᵀy/σ²‖ exceeds 1e-8·(1 + ‖rhs‖).
    pub fn analytic_posterior(&self) -> Result<GaussianSummary> {
        let d = self.d;
        let mut precision = DMatrix::<f64>::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                precision[(a, b)] = self.gram[a * d + b] / self.noise_variance;
            }
            precision[(a, a)] += self.prior_precision;
        }
        let rhs = DVector::from_iterator(d, self.xty.iter().map(|v| v / self.noise_variance));
        let chol = Cholesky::new(precision.clone()).ok_or(Error::SingularCovariance)?;
        let mean = chol.solve(&rhs);
        let covariance = chol.inverse();
        let residual = (&precision * &mean - &rhs).norm();
        if residual > 1e-8 * (1.0 + rhs.norm()) {
            return Err(Error::PosteriorSolveFailed(residual));
        }
        // Symmetrize away the rounding skew from the inverse.
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        GaussianSummary::new(mean, covariance)
    }
}

impl TargetModel for LinearGaussianModel {
    fn dim(&self) -> usize {
        self.d
    }

    fn data_len(&self) -> usize {
        self.n
    }

    fn accumulate_prior_log_grad(&self, params: &[f64], acc: &mut [f64]) {
        for (a, p) in acc.iter_mut().zip(params) {
            *a -= self.prior_precision * p;
        }
    }

    fn accumulate_datum_log_grad(&self, params: &[f64], index: usize, scale: f64, acc: &mut [f64]) {
        let row = self.row(index);
        let pred: f64 = row.iter().zip(params).map(|(a, b)| a * b).sum();
        let coeff = scale * (self.targets[index] - pred) / self.noise_variance;
        for (a, x) in acc.iter_mut().zip(row) {
            *a += coeff * x;
        }
    }

    fn neg_log_posterior(&self, params: &[f64]) -> f64 {
        let mut sq = 0.0;
        for i in 0..self.n {
            let pred: f64 = self.row(i).iter().zip(params).map(|(a, b)| a * b).sum();
            let r = self.targets[i] - pred;
            sq += r * r;
        }
        let prior: f64 = params.iter().map(|p| p * p).sum();
        sq / (2.0 * self.noise_variance) + self.prior_precision * prior / 2.0
    }

    fn datum_log_lik(&self, params: &[f64], index: usize) -> f64 {
        let pred: f64 = self.row(index).iter().zip(params).map(|(a, b)| a * b).sum();
        let r = self.targets[index] - pred;
        -r * r / (2.0 * self.noise_variance)
    }

    fn fast_full_grad_into(&self, params: &[f64], out: &mut [f64]) {
        // ∇U = (XᵀXθ − Xᵀy)/σ² + τθ
        let d = self.d;
        for a in 0..d {
            let gx: f64 = self.gram[a * d..(a + 1) * d]
                .iter()
                .zip(params)
                .map(|(g, p)| g * p)
                .sum();
            out[a] = (gx - self.xty[a]) / self.noise_variance + self.prior_precision * params[a];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::full_gradient;
    use crate::stream::derive_chain_stream;

    #[test]
    fn prior_only_gradient_is_theta() {
        // X = 0 ⇒ data terms vanish, ∇U = τθ with τ = 1.
        let m = LinearGaussianModel::new(vec![0.0, 0.0], vec![0.5, -0.3], 1, 1.0, 1.0).unwrap();
        let theta = ParamVector::from_vec(vec![1.7]);
        let g = full_gradient(&m, &theta).unwrap();
        assert!((g[0] - 1.7).abs() < 1e-12);
    }

    #[test]
    fn one_dim_gradient_matches_hand_derivative() {
        // U(θ) = ½(1−θ)² + ½θ², U'(0) = −1.
        let m = LinearGaussianModel::new(vec![1.0], vec![1.0], 1, 1.0, 1.0).unwrap();
        let g = full_gradient(&m, &ParamVector::zeros(1)).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_dim_posterior_closed_form() {
        // Σ⁻¹ = 1 + 1 = 2 ⇒ Σ = 0.5, μ = 0.5.
        let m = LinearGaussianModel::new(vec![1.0], vec![1.0], 1, 1.0, 1.0).unwrap();
        let post = m.analytic_posterior().unwrap();
        assert!((post.covariance()[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((post.mean()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_design_posterior_is_prior() {
        let m =
            LinearGaussianModel::new(vec![0.0; 6], vec![1.0, 2.0, 3.0], 2, 1.0, 4.0).unwrap();
        let post = m.analytic_posterior().unwrap();
        assert!((post.covariance()[(0, 0)] - 0.25).abs() < 1e-12);
        assert!((post.covariance()[(1, 1)] - 0.25).abs() < 1e-12);
        assert!(post.mean().norm() < 1e-12);
    }

    #[test]
    fn posterior_identity_residual_small() {
        let mut rng = derive_chain_stream(11, 0);
        let (m, _) = LinearGaussianModel::synthetic(40, 4, 1.5, 0.01, &mut rng).unwrap();
        let post = m.analytic_posterior().unwrap();
        // ‖Σ⁻¹μ − Xᵀy/σ²‖ < 1e-8
        let d = 4;
        let mut precision = DMatrix::<f64>::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                precision[(a, b)] = m.gram[a * d + b] / m.noise_variance;
            }
            precision[(a, a)] += m.prior_precision;
        }
        let rhs = DVector::from_iterator(d, m.xty.iter().map(|v| v / m.noise_variance));
        let residual = (&precision * post.mean() - &rhs).norm();
        assert!(residual < 1e-8, "residual {residual}");
    }

    #[test]
    fn fast_gradient_matches_composed_gradient() {
        let mut rng = derive_chain_stream(7, 3);
        let (m, _) = LinearGaussianModel::synthetic(50, 6, 0.8, 0.2, &mut rng).unwrap();
        let theta: ParamVector = (0..6).map(|i| 0.3 * i as f64 - 0.7).collect();
        let slow = full_gradient(&m, &theta).unwrap();
        let mut fast = vec![0.0; 6];
        m.fast_full_grad_into(&theta, &mut fast);
        for (s, f) in slow.iter().zip(&fast) {
            assert!((s - f).abs() <= 1e-10 * s.abs().max(1.0));
        }
    }
}
