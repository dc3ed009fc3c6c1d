//! Empirical posterior summaries and error metrics.

mod moments;

pub use moments::{
    clipped_increment_covariance_constant, mn_monte_carlo, mn_sgld_analytic, mn_sglrw_analytic,
    third_moment_analytic, third_moment_monte_carlo, ClipConstantEstimate, MnMonteCarlo,
    MomentErrorTensor, ZetaThirdMoments,
};

use crate::models::GaussianSummary;
use crate::{Error, ParamVector, Result};
use nalgebra::{Cholesky, DMatrix, DVector};

/// Sample mean and unbiased (n−1) covariance of a set of draws.
///
/// When the covariance is numerically singular a diagonal jitter of
/// 1e-10·trace/d is added once.
pub fn empirical_gaussian_fit(samples: &[ParamVector]) -> Result<GaussianSummary> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let d = samples[0].dim();
    let n = samples.len() as f64;
    let mut mean = DVector::<f64>::zeros(d);
    for s in samples {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.dim(),
            });
        }
        for i in 0..d {
            mean[i] += s[i];
        }
    }
    mean /= n;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for s in samples {
        for i in 0..d {
            centered[i] = s[i] - mean[i];
        }
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    cov /= n - 1.0;
    for i in 0..d {
        for j in (i + 1)..d {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    if Cholesky::new(cov.clone()).is_none() {
        let jitter = 1e-10 * cov.trace() / d as f64;
        for i in 0..d {
            cov[(i, i)] += jitter;
        }
    }
    GaussianSummary::new(mean, cov)
}

/// KL(p ‖ q) = ½[tr(Σq⁻¹Σp) − d + (μq−μp)ᵀΣq⁻¹(μq−μp) + ln(detΣq/detΣp)].
///
/// Errors when Σq is not positive definite; a degenerate Σp yields +∞.
pub fn gaussian_kl(p: &GaussianSummary, q: &GaussianSummary) -> Result<f64> {
    let d = p.dim();
    if q.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.dim(),
        });
    }
    let chol_q = Cholesky::new(q.covariance().clone()).ok_or(Error::SingularCovariance)?;
    let log_det_q: f64 = 2.0 * chol_q.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_det_p = match Cholesky::new(p.covariance().clone()) {
        Some(chol_p) => 2.0 * chol_p.l().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
        None => return Ok(f64::INFINITY),
    };
    let trace = chol_q.solve(p.covariance()).trace();
    let diff = q.mean() - p.mean();
    let maha = diff.dot(&chol_q.solve(&diff));
    let kl = 0.5 * (trace - d as f64 + maha + log_det_q - log_det_p);
    Ok(kl.max(0.0))
}

/// ‖est − truth‖_F.
pub fn covariance_frobenius_error(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if est.shape() != truth.shape() {
        return Err(Error::ShapeMismatch(
            est.nrows(),
            est.ncols(),
            truth.nrows(),
            truth.ncols(),
        ));
    }
    Ok((est - truth).norm())
}

/// Mean over runs of ‖Σ_est − Σ_true‖_F².
pub fn covariance_mse(runs: &[DMatrix<f64>], truth: &DMatrix<f64>) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut total = 0.0;
    for est in runs {
        let frob = covariance_frobenius_error(est, truth)?;
        total += frob * frob;
    }
    Ok(total / runs.len() as f64)
}

/// Binned counts over fixed edges.
#[derive(Clone, Debug)]
pub struct HistogramSummary {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Samples falling outside [edges.first(), edges.last()).
    pub outside: u64,
}

impl HistogramSummary {
    pub fn build(samples: &[f64], edges: &[f64]) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "edges must be strictly increasing with at least two entries".into(),
            ));
        }
        let mut counts = vec![0u64; edges.len() - 1];
        let mut outside = 0u64;
        for &x in samples {
            if !x.is_finite() || x < edges[0] || x >= edges[edges.len() - 1] {
                outside += 1;
                continue;
            }
            let bin = edges.partition_point(|e| *e <= x) - 1;
            counts[bin] += 1;
        }
        Ok(HistogramSummary {
            bin_edges: edges.to_vec(),
            counts,
            outside,
        })
    }
}

/// Total-variation distance between a sample histogram and a density.
///
/// Target bin masses come from composite-Simpson quadrature; mass outside the
/// edge range counts fully as discrepancy on both sides, so the result stays
/// in [0, 1].
pub fn histogram_tv_distance<F: Fn(f64) -> f64>(
    samples: &[f64],
    target_density: F,
    edges: &[f64],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let hist = HistogramSummary::build(samples, edges)?;
    let n = samples.len() as f64;
    let mut target_inside = 0.0;
    let mut tv = 0.0;
    for (bin, count) in hist.counts.iter().enumerate() {
        let q = simpson(&target_density, edges[bin], edges[bin + 1], 32);
        target_inside += q;
        tv += (*count as f64 / n - q).abs();
    }
    let p_out = hist.outside as f64 / n;
    let q_out = (1.0 - target_inside).max(0.0);
    Ok((0.5 * (tv + p_out + q_out)).clamp(0.0, 1.0))
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels * 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * k as f64);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Mixture1DModel;
    use crate::noise::NoiseSpec;
    use crate::stream::derive_chain_stream;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn summary(mean: &[f64], cov: DMatrix<f64>) -> GaussianSummary {
        GaussianSummary::new(DVector::from_row_slice(mean), cov).unwrap()
    }

    #[test]
    fn fit_of_two_point_sample() {
        // Samples {−1, +1}: mean 0, unbiased variance 2.
        let samples = vec![
            ParamVector::from_vec(vec![-1.0]),
            ParamVector::from_vec(vec![1.0]),
        ];
        let fit = empirical_gaussian_fit(&samples).unwrap();
        assert!(fit.mean()[0].abs() < 1e-15);
        assert!((fit.covariance()[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn fit_of_identical_samples_degenerates_gracefully() {
        let samples = vec![ParamVector::from_vec(vec![2.0, -1.0]); 5];
        let fit = empirical_gaussian_fit(&samples).unwrap();
        assert_eq!(fit.mean()[0], 2.0);
        assert_eq!(fit.mean()[1], -1.0);
        assert!(fit.covariance().norm() < 1e-20);
    }

    #[test]
    fn fit_recovers_gaussian_moments() {
        let mut rng = derive_chain_stream(201, 0);
        let n = 200_000;
        let mean = [1.0, -2.0, 0.5];
        let sds = [1.0, 0.5, 2.0];
        let samples: Vec<ParamVector> = (0..n)
            .map(|_| {
                (0..3)
                    .map(|i| mean[i] + sds[i] * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let fit = empirical_gaussian_fit(&samples).unwrap();
        for i in 0..3 {
            assert!((fit.mean()[i] - mean[i]).abs() < 0.02);
            for j in 0..3 {
                let expected = if i == j { sds[i] * sds[i] } else { 0.0 };
                assert!((fit.covariance()[(i, j)] - expected).abs() < 0.05);
            }
        }
    }

    #[test]
    fn kl_identity_is_zero() {
        let p = summary(&[0.3, -0.2], dmatrix![1.5, 0.2; 0.2, 0.8]);
        assert!(gaussian_kl(&p, &p).unwrap() < 1e-10);
    }

    #[test]
    fn kl_one_dim_mean_shift() {
        // KL(N(0,1) ‖ N(1,1)) = μ²/2 = 0.5.
        let p = summary(&[0.0], dmatrix![1.0]);
        let q = summary(&[1.0], dmatrix![1.0]);
        assert!((gaussian_kl(&p, &q).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_two_dim_scale_mismatch() {
        // KL(N(0,2I) ‖ N(0,I)) = ½(4 − 2 + ln(1/4)).
        let p = summary(&[0.0, 0.0], DMatrix::identity(2, 2) * 2.0);
        let q = summary(&[0.0, 0.0], DMatrix::identity(2, 2));
        assert!((gaussian_kl(&p, &q).unwrap() - 0.3068528194400547).abs() < 1e-12);
    }

    #[test]
    fn kl_rejects_singular_q_but_not_singular_p() {
        let p = summary(&[0.0], dmatrix![0.0]);
        let q = summary(&[0.0], dmatrix![1.0]);
        assert_eq!(gaussian_kl(&p, &q).unwrap(), f64::INFINITY);
        assert!(gaussian_kl(&q, &p).is_err());
    }

    #[test]
    fn frobenius_examples() {
        let truth = DMatrix::<f64>::zeros(2, 2);
        let est = dmatrix![3.0, 0.0; 0.0, 4.0];
        assert_eq!(covariance_frobenius_error(&est, &est).unwrap(), 0.0);
        assert!((covariance_frobenius_error(&est, &truth).unwrap() - 5.0).abs() < 1e-12);
        assert!(covariance_frobenius_error(&est, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn covariance_mse_examples() {
        let truth = DMatrix::<f64>::zeros(2, 2);
        let est = dmatrix![3.0, 0.0; 0.0, 4.0];
        assert_eq!(covariance_mse(&[truth.clone()], &truth).unwrap(), 0.0);
        assert!((covariance_mse(&[est.clone()], &truth).unwrap() - 25.0).abs() < 1e-12);
        let a = covariance_mse(&[est.clone(), truth.clone()], &truth).unwrap();
        let b = covariance_mse(&[truth.clone(), est], &truth).unwrap();
        assert_eq!(a, b);
        assert!(covariance_mse(&[], &truth).is_err());
    }

    proptest! {
        #[test]
        fn frobenius_triangle_inequality(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
            c in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            let ma = DMatrix::from_row_slice(2, 2, &a);
            let mb = DMatrix::from_row_slice(2, 2, &b);
            let mc = DMatrix::from_row_slice(2, 2, &c);
            let ab = covariance_frobenius_error(&ma, &mb).unwrap();
            let bc = covariance_frobenius_error(&mb, &mc).unwrap();
            let ac = covariance_frobenius_error(&ma, &mc).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn kl_nonnegative_on_random_summaries(
            m1 in -3.0f64..3.0, m2 in -3.0f64..3.0,
            v1 in 0.1f64..5.0, v2 in 0.1f64..5.0,
        ) {
            let p = summary(&[m1], dmatrix![v1]);
            let q = summary(&[m2], dmatrix![v2]);
            prop_assert!(gaussian_kl(&p, &q).unwrap() >= 0.0);
        }
    }

    #[test]
    fn tv_single_bin_against_uniform() {
        // All samples in bin 0, target uniform over 10 unit bins: TV = 0.9.
        let edges: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let samples = vec![0.5; 1000];
        let tv = histogram_tv_distance(&samples, |_| 0.1, &edges).unwrap();
        assert!((tv - 0.9).abs() < 1e-9, "tv = {tv}");
    }

    #[test]
    fn tv_self_consistency_on_default_mixture() {
        // Exact mixture draws should approach TV 0; ≤ 0.02 at n = 10⁶.
        let target = Mixture1DModel::default_target(NoiseSpec::gaussian(1.0));
        let mut rng = derive_chain_stream(202, 0);
        let n = 1_000_000;
        let weights = [0.3, 0.4, 0.3];
        let means = [-4.0, 0.0, 4.0];
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let k = if u < weights[0] {
                    0
                } else if u < weights[0] + weights[1] {
                    1
                } else {
                    2
                };
                means[k] + 0.8 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let edges: Vec<f64> = (0..=80).map(|i| -8.0 + 0.2 * i as f64).collect();
        let tv = histogram_tv_distance(&samples, |x| target.density(x), &edges).unwrap();
        assert!(tv <= 0.02, "tv = {tv}");
    }

    proptest! {
        #[test]
        fn tv_is_bounded(samples in proptest::collection::vec(-20.0f64..20.0, 1..200)) {
            let edges: Vec<f64> = (0..=16).map(|i| -8.0 + i as f64).collect();
            let tv = histogram_tv_distance(&samples, |x| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(), &edges).unwrap();
            prop_assert!((0.0..=1.0).contains(&tv));
        }
    }
}
