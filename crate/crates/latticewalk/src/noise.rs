//! Random variate generation: Gaussian vectors, symmetric α-stable noise,
//! minibatch index sampling, and a synthetic gradient-noise model.

use crate::stream::ChainRng;
use crate::{Error, ParamVector, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseFamily {
    Gaussian,
    AlphaStable,
}

/// Marginal noise distribution: N(0, scale²) or symmetric stable S(α, β=0, scale).
///
/// In the stable parameterization used here α = 2 gives N(0, 2·scale²), so the
/// two families coincide only up to that factor of two.
#[derive(Clone, Copy, Debug)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub alpha: f64,
    pub scale: f64,
}

impl NoiseSpec {
    pub fn gaussian(scale: f64) -> Self {
        NoiseSpec {
            family: NoiseFamily::Gaussian,
            alpha: 2.0,
            scale,
        }
    }

    pub fn alpha_stable(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter("scale must be positive".into()));
        }
        Ok(NoiseSpec {
            family: NoiseFamily::AlphaStable,
            alpha,
            scale,
        })
    }

    /// One draw from the marginal law.
    pub fn sample(&self, rng: &mut ChainRng) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => self.scale * rng.sample::<f64, _>(StandardNormal),
            NoiseFamily::AlphaStable => self.scale * standard_stable(rng, self.alpha),
        }
    }
}

/// d independent standard normal draws.
pub fn sample_gaussian_vector(rng: &mut ChainRng, d: usize) -> ParamVector {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Chambers–Mallows–Stuck draw from the symmetric stable law S(α, β=0, 1, 0).
///
/// The removable singularity at α = 1 (Cauchy) gets an explicit branch.
fn standard_stable(rng: &mut ChainRng, alpha: f64) -> f64 {
    let u: f64 = rng.random();
    let v = PI * (u - 0.5); // Uniform(−π/2, π/2)
    if (alpha - 1.0).abs() < 1e-9 {
        return v.tan();
    }
    let w = loop {
        let w: f64 = rng.sample(Exp1);
        if w > 0.0 {
            break w;
        }
    };
    let av = alpha * v;
    (av.sin() / v.cos().powf(1.0 / alpha))
        * (((v - av).cos() / w).powf((1.0 - alpha) / alpha))
}

/// d i.i.d. draws from the symmetric stable law described by `spec`.
pub fn sample_alpha_stable(rng: &mut ChainRng, spec: &NoiseSpec, d: usize) -> Result<ParamVector> {
    if spec.family != NoiseFamily::AlphaStable {
        return Err(Error::InvalidParameter(
            "spec.family must be alpha_stable".into(),
        ));
    }
    if !(spec.alpha > 0.0 && spec.alpha <= 2.0) {
        return Err(Error::InvalidAlpha(spec.alpha));
    }
    Ok((0..d)
        .map(|_| spec.scale * standard_stable(rng, spec.alpha))
        .collect())
}

/// Uniformly random size-B subset of {0,…,N−1}, without replacement.
///
/// B = N returns the full index set without consuming randomness.
pub fn draw_minibatch(rng: &mut ChainRng, n: usize, b: usize) -> Result<Vec<usize>> {
    if b == 0 {
        return Err(Error::EmptyBatch);
    }
    if b > n {
        return Err(Error::BatchTooLarge { batch: b, data: n });
    }
    if b == n {
        return Ok((0..n).collect());
    }
    Ok(rand::seq::index::sample(rng, n, b).into_vec())
}

/// Gradient-noise model ζ = factor · z with i.i.d. marginals z.
///
/// For the Gaussian family Cov[ζ] = scale² · factor·factorᵀ; the heavy-tailed
/// variant substitutes stable marginals with the same dependence structure.
#[derive(Clone, Debug)]
pub struct SyntheticNoiseModel {
    factor: DMatrix<f64>,
    distribution: NoiseSpec,
}

impl SyntheticNoiseModel {
    pub fn new(factor: DMatrix<f64>, distribution: NoiseSpec) -> Result<Self> {
        if factor.nrows() != factor.ncols() {
            return Err(Error::ShapeMismatch(
                factor.nrows(),
                factor.ncols(),
                factor.nrows(),
                factor.nrows(),
            ));
        }
        Ok(SyntheticNoiseModel {
            factor,
            distribution,
        })
    }

    /// Gaussian ζ with covariance G = sd²·I (factor = sd·I).
    pub fn isotropic_gaussian(d: usize, sd: f64) -> Self {
        SyntheticNoiseModel {
            factor: DMatrix::identity(d, d) * sd,
            distribution: NoiseSpec::gaussian(1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// G = scale² · factor·factorᵀ (exact only for the Gaussian family).
    pub fn covariance(&self) -> DMatrix<f64> {
        let s2 = self.distribution.scale * self.distribution.scale;
        &self.factor * self.factor.transpose() * s2
    }
}

/// One zero-mean noise vector from the model.
pub fn sample_synthetic_noise(rng: &mut ChainRng, model: &SyntheticNoiseModel) -> ParamVector {
    let d = model.dim();
    let mut z = vec![0.0; d];
    for zi in z.iter_mut() {
        *zi = model.distribution.sample(rng);
    }
    let mut out = ParamVector::zeros(d);
    for i in 0..d {
        let mut acc = 0.0;
        for (j, zj) in z.iter().enumerate() {
            acc += model.factor[(i, j)] * zj;
        }
        out[i] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::derive_chain_stream;

    #[test]
    fn gaussian_vector_moments() {
        let mut rng = derive_chain_stream(101, 0);
        let n = 1_000_000usize;
        let d = 3;
        let mut sum = [0.0; 3];
        let mut sumsq = [0.0; 3];
        let mut cross01 = 0.0;
        for _ in 0..n {
            let v = sample_gaussian_vector(&mut rng, d);
            for i in 0..d {
                sum[i] += v[i];
                sumsq[i] += v[i] * v[i];
            }
            cross01 += v[0] * v[1];
        }
        let nf = n as f64;
        for i in 0..d {
            let mean = sum[i] / nf;
            let var = sumsq[i] / nf - mean * mean;
            assert!(mean.abs() < 4.0 / nf.sqrt(), "mean[{i}] = {mean}");
            assert!((var - 1.0).abs() < 0.01, "var[{i}] = {var}");
        }
        assert!((cross01 / nf).abs() < 0.01);
    }

    #[test]
    fn stable_alpha_two_is_gaussian_with_variance_two() {
        let mut rng = derive_chain_stream(102, 0);
        let spec = NoiseSpec::alpha_stable(2.0, 1.0).unwrap();
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = sample_alpha_stable(&mut rng, &spec, 1).unwrap()[0];
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!((var - 2.0).abs() < 0.02, "var = {var}");
    }

    #[test]
    fn stable_alpha_one_has_cauchy_quartiles() {
        let mut rng = derive_chain_stream(103, 0);
        let spec = NoiseSpec::alpha_stable(1.0, 1.0).unwrap();
        let n = 1_000_000usize;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| spec.scale * standard_stable(&mut rng, spec.alpha))
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = draws[n / 4];
        let q2 = draws[n / 2];
        let q3 = draws[3 * n / 4];
        assert!((q1 + 1.0).abs() < 0.02, "q1 = {q1}");
        assert!(q2.abs() < 0.02, "median = {q2}");
        assert!((q3 - 1.0).abs() < 0.02, "q3 = {q3}");
    }

    #[test]
    fn stable_median_is_zero_for_fractional_alpha() {
        let mut rng = derive_chain_stream(104, 0);
        let spec = NoiseSpec::alpha_stable(1.5, 1.0).unwrap();
        let n = 200_000usize;
        let negatives = (0..n)
            .filter(|_| standard_stable(&mut rng, spec.alpha) < 0.0)
            .count();
        let frac = negatives as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.005, "P(X<0) = {frac}");
    }

    #[test]
    fn invalid_alpha_rejected() {
        assert!(NoiseSpec::alpha_stable(0.0, 1.0).is_err());
        assert!(NoiseSpec::alpha_stable(2.5, 1.0).is_err());
    }

    #[test]
    fn minibatch_full_set_and_bounds() {
        let mut rng = derive_chain_stream(105, 0);
        assert_eq!(draw_minibatch(&mut rng, 5, 5).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(draw_minibatch(&mut rng, 4, 5).is_err());
        assert!(draw_minibatch(&mut rng, 4, 0).is_err());
        for _ in 0..100 {
            let batch = draw_minibatch(&mut rng, 10, 4).unwrap();
            assert_eq!(batch.len(), 4);
            let mut sorted = batch.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 4, "duplicate index in {batch:?}");
            assert!(batch.iter().all(|&i| i < 10));
        }
    }

    #[test]
    fn minibatch_subsets_are_uniform() {
        // N=4, B=2: all 6 subsets should appear with frequency 1/6 ± 0.005.
        let mut rng = derive_chain_stream(106, 0);
        let mut counts = std::collections::HashMap::new();
        let n_draws = 600_000;
        for _ in 0..n_draws {
            let mut batch = draw_minibatch(&mut rng, 4, 2).unwrap();
            batch.sort_unstable();
            *counts.entry((batch[0], batch[1])).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for (subset, count) in counts {
            let freq = count as f64 / n_draws as f64;
            assert!(
                (freq - 1.0 / 6.0).abs() < 0.005,
                "subset {subset:?} frequency {freq}"
            );
        }
    }

    #[test]
    fn synthetic_noise_zero_factor_is_zero() {
        let mut rng = derive_chain_stream(107, 0);
        let model =
            SyntheticNoiseModel::new(DMatrix::zeros(3, 3), NoiseSpec::gaussian(1.0)).unwrap();
        for _ in 0..10 {
            let z = sample_synthetic_noise(&mut rng, &model);
            assert!(z.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn synthetic_noise_identity_factor_covariance() {
        let mut rng = derive_chain_stream(108, 0);
        let model = SyntheticNoiseModel::isotropic_gaussian(2, 1.0);
        let n = 1_000_000usize;
        let mut sum = [0.0; 2];
        let mut cov = [[0.0; 2]; 2];
        for _ in 0..n {
            let z = sample_synthetic_noise(&mut rng, &model);
            for i in 0..2 {
                sum[i] += z[i];
                for j in 0..2 {
                    cov[i][j] += z[i] * z[j];
                }
            }
        }
        let nf = n as f64;
        for i in 0..2 {
            assert!((sum[i] / nf).abs() < 4.0 / nf.sqrt());
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov[i][j] / nf - expected).abs() < 0.01,
                    "cov[{i}][{j}] = {}",
                    cov[i][j] / nf
                );
            }
        }
    }
}
