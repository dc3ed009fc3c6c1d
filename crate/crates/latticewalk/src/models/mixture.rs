//! Univariate Gaussian-mixture target for the heavy-tailed noise experiment.

use super::TargetModel;
use crate::noise::NoiseSpec;
use crate::{Error, Result};

const LOG_2PI: f64 = 1.8378770664093453;

/// Multimodal 1-D target q(x) = Σₖ wₖ N(x; μₖ, σₖ²).
///
/// Used with its exact gradient corrupted by synthetic noise, so there is no
/// data term: the whole −log q plays the role of U.
pub struct Mixture1DModel {
    weights: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
    noise_spec: NoiseSpec,
}

impl Mixture1DModel {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<f64>,
        stds: Vec<f64>,
        noise_spec: NoiseSpec,
    ) -> Result<Self> {
        if weights.len() != means.len() || weights.len() != stds.len() || weights.is_empty() {
            return Err(Error::InvalidParameter(
                "component lists must be non-empty and of equal length".into(),
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0)) || stds.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter(
                "weights and stds must be positive".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "weights must sum to 1 within 1e-12, got {total}"
            )));
        }
        Ok(Mixture1DModel {
            weights,
            means,
            stds,
            noise_spec,
        })
    }

    /// Three well-separated unit-order modes; the Fig.-2-style default.
    pub fn default_target(noise_spec: NoiseSpec) -> Self {
        Mixture1DModel::new(
            vec![0.3, 0.4, 0.3],
            vec![-4.0, 0.0, 4.0],
            vec![0.8, 0.8, 0.8],
            noise_spec,
        )
        .expect("default mixture parameters are valid")
    }

    pub fn noise_spec(&self) -> &NoiseSpec {
        &self.noise_spec
    }

    /// Exact draw from the mixture (component by weight, then Gaussian).
    pub fn sample(&self, rng: &mut crate::stream::ChainRng) -> f64 {
        use rand::Rng;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut component = self.weights.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                component = k;
                break;
            }
        }
        self.means[component]
            + self.stds[component] * rng.sample::<f64, _>(rand_distr::StandardNormal)
    }

    /// log q(x), evaluated via logsumexp.
    pub fn log_density(&self, x: f64) -> f64 {
        let mut max = f64::NEG_INFINITY;
        let logs: Vec<f64> = (0..self.weights.len())
            .map(|k| {
                let z = (x - self.means[k]) / self.stds[k];
                let l = self.weights[k].ln() - 0.5 * z * z - self.stds[k].ln() - 0.5 * LOG_2PI;
                if l > max {
                    max = l;
                }
                l
            })
            .collect();
        max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// U'(x) = Σₖ rₖ(x)·(x−μₖ)/σₖ² with responsibilities rₖ computed in
    /// log-space; finite for every finite x.
    pub fn gradient(&self, x: f64) -> f64 {
        let k = self.weights.len();
        let mut logs = vec![0.0; k];
        let mut max = f64::NEG_INFINITY;
        for (i, l) in logs.iter_mut().enumerate() {
            let z = (x - self.means[i]) / self.stds[i];
            *l = self.weights[i].ln() - 0.5 * z * z - self.stds[i].ln();
            if *l > max {
                max = *l;
            }
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..k {
            let r = (logs[i] - max).exp();
            den += r;
            num += r * (x - self.means[i]) / (self.stds[i] * self.stds[i]);
        }
        num / den
    }
}

/// Returns U'(x) for a mixture target.
pub fn mixture1d_gradient(model: &Mixture1DModel, x: f64) -> f64 {
    model.gradient(x)
}

impl TargetModel for Mixture1DModel {
    fn dim(&self) -> usize {
        1
    }

    fn data_len(&self) -> usize {
        0
    }

    fn accumulate_prior_log_grad(&self, params: &[f64], acc: &mut [f64]) {
        // The whole target is the "prior": ∇ log q = −U'.
        acc[0] -= self.gradient(params[0]);
    }

    fn accumulate_datum_log_grad(
        &self,
        _params: &[f64],
        _index: usize,
        _scale: f64,
        _acc: &mut [f64],
    ) {
        unreachable!("mixture target has no data terms");
    }

    fn neg_log_posterior(&self, params: &[f64]) -> f64 {
        -self.log_density(params[0])
    }

    fn datum_log_lik(&self, _params: &[f64], _index: usize) -> f64 {
        unreachable!("mixture target has no data terms");
    }
}
