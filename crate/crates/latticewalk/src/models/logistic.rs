//! Binary logistic regression with a Gaussian prior.

use super::TargetModel;
use crate::stream::ChainRng;
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// log σ(z), branch on the sign of z so |z| > 30 cannot overflow.
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic likelihood p(y=1|x,θ) = σ(xᵀθ) with prior N(0, τ⁻¹I).
pub struct LogisticModel {
    rows: Vec<f64>, // N×d, row-major
    labels: Vec<f64>,
    n: usize,
    d: usize,
    prior_precision: f64,
}

impl LogisticModel {
    pub fn new(rows: Vec<f64>, labels: Vec<f64>, d: usize, prior_precision: f64) -> Result<Self> {
        if d == 0 || rows.len() % d != 0 {
            return Err(Error::InvalidParameter(
                "feature matrix length must be a multiple of d".into(),
            ));
        }
        let n = rows.len() / d;
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if labels.iter().any(|y| *y != 0.0 && *y != 1.0) {
            return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite feature entry".into()));
        }
        if !(prior_precision > 0.0) {
            return Err(Error::InvalidParameter(
                "prior_precision must be positive".into(),
            ));
        }
        Ok(LogisticModel {
            rows,
            labels,
            n,
            d,
            prior_precision,
        })
    }

    /// Two Gaussian blobs at ±μ along a random direction; labels by blob.
    ///
    /// A stand-in for file-based data so desk-scale runs need no downloads.
    pub fn synthetic_blobs(
        n: usize,
        d: usize,
        separation: f64,
        prior_precision: f64,
        rng: &mut ChainRng,
    ) -> Result<Self> {
        let dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let mut rows = vec![0.0; n * d];
        let mut labels = vec![0.0; n];
        for i in 0..n {
            let y = (i % 2) as f64;
            let sign = if y > 0.5 { 1.0 } else { -1.0 };
            for a in 0..d {
                rows[i * d + a] =
                    sign * separation * dir[a] / norm + rng.sample::<f64, _>(StandardNormal);
            }
            labels[i] = y;
        }
        Self::new(rows, labels, d, prior_precision)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }
}

impl TargetModel for LogisticModel {
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
        let z: f64 = row.iter().zip(params).map(|(a, b)| a * b).sum();
        let coeff = scale * (self.labels[index] - sigmoid(z));
        for (a, x) in acc.iter_mut().zip(row) {
            *a += coeff * x;
        }
    }

    fn neg_log_posterior(&self, params: &[f64]) -> f64 {
        let mut nll = 0.0;
        for i in 0..self.n {
            nll -= self.datum_log_lik(params, i);
        }
        let prior: f64 = params.iter().map(|p| p * p).sum();
        nll + self.prior_precision * prior / 2.0
    }

    fn datum_log_lik(&self, params: &[f64], index: usize) -> f64 {
        let z: f64 = self.row(index).iter().zip(params).map(|(a, b)| a * b).sum();
        let y = self.labels[index];
        y * log_sigmoid(z) + (1.0 - y) * log_sigmoid(-z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::per_datum_gradient;
    use crate::ParamVector;

    #[test]
    fn datum_gradient_at_origin() {
        // (y − σ(0))·x = 0.5·(1, 0)
        let m = LogisticModel::new(vec![1.0, 0.0], vec![1.0], 2, 1.0).unwrap();
        let g = per_datum_gradient(&m, &ParamVector::zeros(2), 0).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15);
        assert!(g[1].abs() < 1e-15);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let m = LogisticModel::new(vec![1.0], vec![1.0], 1, 1.0).unwrap();
        let theta = ParamVector::from_vec(vec![500.0]);
        assert!(m.neg_log_posterior(&theta).is_finite());
        assert!(m.datum_log_lik(&theta, 0).is_finite());
        let theta = ParamVector::from_vec(vec![-500.0]);
        assert!(m.neg_log_posterior(&theta).is_finite());
    }

    #[test]
    fn index_out_of_range_errors() {
        let m = LogisticModel::new(vec![1.0], vec![1.0], 1, 1.0).unwrap();
        assert!(per_datum_gradient(&m, &ParamVector::zeros(1), 1).is_err());
    }
}
