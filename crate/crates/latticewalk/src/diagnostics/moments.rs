//! Second- and third-moment error oracles for the minibatch analysis.
//!
//! The second-order minibatch error is
//!
//!   M_n(θ;B) = δ⁻²·E_ξ[Δθ^mb(Δθ^mb)ᵀ − Δθ^fb(Δθ^fb)ᵀ | θ, B],
//!
//! the rescaled gap between the one-step second moments of the minibatch and
//! full-batch updates, with the gradient decomposed as ∇̂U = ∇U + ζ. For SGLD
//! the gap is ζζᵀ + ∇Uζᵀ + ζ∇Uᵀ; the lattice walk's fixed-magnitude steps
//! zero its diagonal, leaving only the off-diagonal part. Monte-Carlo
//! estimators of the same conditional expectations live alongside the closed
//! forms so each can check the other.

use crate::noise::{sample_synthetic_noise, SyntheticNoiseModel};
use crate::samplers::{lrw_transition_prob, SamplerKind};
use crate::stream::ChainRng;
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// The scheme-dependent second-order error matrix M_n (symmetric, d×d).
#[derive(Clone, Debug)]
pub struct MomentErrorTensor {
    matrix: DMatrix<f64>,
}

impl MomentErrorTensor {
    fn new(matrix: DMatrix<f64>) -> Self {
        MomentErrorTensor { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }
}

fn check_pair(grad: &[f64], zeta: &[f64]) -> Result<usize> {
    if grad.len() != zeta.len() || grad.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: grad.len(),
            got: zeta.len(),
        });
    }
    Ok(grad.len())
}

/// M_{n,SGLD} = ζζᵀ + ∇Uζᵀ + ζ∇Uᵀ.
pub fn mn_sgld_analytic(grad: &[f64], zeta: &[f64]) -> Result<MomentErrorTensor> {
    let d = check_pair(grad, zeta)?;
    let mut m = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = zeta[i] * zeta[j] + grad[i] * zeta[j] + zeta[i] * grad[j];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(MomentErrorTensor::new(m))
}

/// M_{n,SGLRW} = offdiag(M_{n,SGLD}); the diagonal is identically zero.
pub fn mn_sglrw_analytic(grad: &[f64], zeta: &[f64]) -> Result<MomentErrorTensor> {
    let mut m = mn_sgld_analytic(grad, zeta)?;
    for i in 0..m.matrix.nrows() {
        m.matrix[(i, i)] = 0.0;
    }
    Ok(m)
}

/// Monte-Carlo estimate of M_n with entrywise standard errors.
#[derive(Clone, Debug)]
pub struct MnMonteCarlo {
    pub estimate: DMatrix<f64>,
    pub std_error: DMatrix<f64>,
    pub n_samples: u64,
}

/// Estimates δ⁻²·E_ξ[Δθ^mb(Δθ^mb)ᵀ − Δθ^fb(Δθ^fb)ᵀ | θ, ζ] by averaging
/// paired one-step simulations with drift ∇U (full batch) vs ∇U + ζ.
///
/// The SGLD pair shares its Gaussian ξ — the coupling used in the derivation
/// of the closed form — so the ζ = 0 case is exact. Lattice sign draws cannot
/// be shared across different tilt probabilities, so the SGLRW pair is
/// simulated with independent draws; its diagonal is still deterministically
/// zero because every coordinate's squared increment is 2δ.
///
/// Requires the unclipped regime: √(δ/2)·max(|∇ᵢU|, |∇ᵢU + ζᵢ|) ≤ 1.
pub fn mn_monte_carlo(
    kind: SamplerKind,
    theta: &[f64],
    grad: &[f64],
    zeta: &[f64],
    step: f64,
    n_samples: u64,
    rng: &mut ChainRng,
) -> Result<MnMonteCarlo> {
    let d = check_pair(grad, zeta)?;
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta.len(),
        });
    }
    if !(step > 0.0) || n_samples == 0 {
        return Err(Error::InvalidParameter(
            "step and n_samples must be positive".into(),
        ));
    }
    let tilt = (step / 2.0).sqrt();
    for i in 0..d {
        if (tilt * grad[i]).abs() > 1.0 || (tilt * (grad[i] + zeta[i])).abs() > 1.0 {
            return Err(Error::ClippedRegime);
        }
    }

    let inv_step_sq = 1.0 / (step * step);
    let mut sum = vec![0.0; d * d];
    let mut sumsq = vec![0.0; d * d];
    let mut fb = vec![0.0; d];
    let mut mb = vec![0.0; d];
    let lattice = (2.0 * step).sqrt();
    let noise = lattice; // √(2δ) appears as both lattice spacing and SGLD noise scale

    match kind {
        SamplerKind::Sgld => {
            for _ in 0..n_samples {
                for i in 0..d {
                    let xi: f64 = rng.sample(StandardNormal);
                    fb[i] = -step * grad[i] + noise * xi;
                    mb[i] = fb[i] - step * zeta[i];
                }
                accumulate_outer_gap(&fb, &mb, inv_step_sq, &mut sum, &mut sumsq);
            }
        }
        SamplerKind::Sglrw => {
            for _ in 0..n_samples {
                for i in 0..d {
                    let (p_plus_fb, _) = lrw_transition_prob(grad[i], step);
                    let u: f64 = rng.random();
                    fb[i] = if u < p_plus_fb { lattice } else { -lattice };
                    let (p_plus_mb, _) = lrw_transition_prob(grad[i] + zeta[i], step);
                    let u: f64 = rng.random();
                    mb[i] = if u < p_plus_mb { lattice } else { -lattice };
                }
                accumulate_outer_gap(&fb, &mb, inv_step_sq, &mut sum, &mut sumsq);
            }
        }
        SamplerKind::ClippedSgld => {
            return Err(Error::InvalidParameter(
                "M_n is defined for sgld and sglrw".into(),
            ));
        }
    }

    let n = n_samples as f64;
    let mut estimate = DMatrix::<f64>::zeros(d, d);
    let mut std_error = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mean = sum[i * d + j] / n;
            let var = (sumsq[i * d + j] / n - mean * mean).max(0.0);
            estimate[(i, j)] = mean;
            std_error[(i, j)] = (var / n).sqrt();
        }
    }
    Ok(MnMonteCarlo {
        estimate,
        std_error,
        n_samples,
    })
}

#[inline]
fn accumulate_outer_gap(fb: &[f64], mb: &[f64], scale: f64, sum: &mut [f64], sumsq: &mut [f64]) {
    let d = fb.len();
    for i in 0..d {
        for j in 0..d {
            let v = (mb[i] * mb[j] - fb[i] * fb[j]) * scale;
            sum[i * d + j] += v;
            sumsq[i * d + j] += v * v;
        }
    }
}

/// Third moments of the minibatch noise, E[ζᵢζⱼζₖ].
///
/// `Zero` covers symmetric laws (Gaussian ζ in particular); `Dense` stores a
/// full d³ tensor in row-major (i·d² + j·d + k) order.
#[derive(Clone, Debug)]
pub enum ZetaThirdMoments {
    Zero,
    Dense { dim: usize, tensor: Vec<f64> },
}

impl ZetaThirdMoments {
    fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        match self {
            ZetaThirdMoments::Zero => 0.0,
            ZetaThirdMoments::Dense { dim, tensor } => tensor[(i * dim + j) * dim + k],
        }
    }
}

enum IndexCase {
    AllEqual { i: usize },
    Pair { pair: usize, single: usize },
    Distinct { i: usize, j: usize, k: usize },
}

fn classify(indices: (usize, usize, usize), d: usize) -> Result<IndexCase> {
    let (i, j, k) = indices;
    if i >= d || j >= d || k >= d {
        return Err(Error::InvalidParameter(format!(
            "indices {indices:?} out of range for dimension {d}"
        )));
    }
    Ok(if i == j && j == k {
        IndexCase::AllEqual { i }
    } else if i == j {
        IndexCase::Pair { pair: i, single: k }
    } else if i == k {
        IndexCase::Pair { pair: i, single: j }
    } else if j == k {
        IndexCase::Pair { pair: j, single: i }
    } else {
        IndexCase::Distinct { i, j, k }
    })
}

/// Closed-form conditional third moment E[Δθᵢ Δθⱼ Δθₖ | θ] for one step.
///
/// Case split on the index pattern; `noise_cov` is G(θ) and `zeta_third`
/// supplies E[ζᵢζⱼζₖ] where the case formula needs it.
pub fn third_moment_analytic(
    kind: SamplerKind,
    grad: &[f64],
    zeta_third: &ZetaThirdMoments,
    noise_cov: &DMatrix<f64>,
    step: f64,
    indices: (usize, usize, usize),
) -> Result<f64> {
    let d = grad.len();
    if noise_cov.nrows() != d || noise_cov.ncols() != d {
        return Err(Error::ShapeMismatch(noise_cov.nrows(), noise_cov.ncols(), d, d));
    }
    let case = classify(indices, d)?;
    let d2 = step * step;
    let d3 = d2 * step;
    let g = grad;
    let gc = noise_cov;
    Ok(match kind {
        SamplerKind::Sgld => match case {
            IndexCase::AllEqual { i } => {
                -6.0 * d2 * g[i]
                    - d3 * (g[i].powi(3) + 3.0 * g[i] * gc[(i, i)] + zeta_third.get(i, i, i))
            }
            IndexCase::Pair { pair: p, single: s } => {
                -2.0 * d2 * g[s]
                    - d3 * (g[p] * g[p] * g[s]
                        + g[s] * gc[(p, p)]
                        + 2.0 * g[p] * gc[(p, s)]
                        + zeta_third.get(p, p, s))
            }
            IndexCase::Distinct { i, j, k } => {
                -d3 * (g[i] * g[j] * g[k]
                    + g[i] * gc[(j, k)]
                    + g[j] * gc[(k, i)]
                    + g[k] * gc[(i, j)]
                    + zeta_third.get(i, j, k))
            }
        },
        SamplerKind::Sglrw => match case {
            IndexCase::AllEqual { i } => -2.0 * d2 * g[i],
            IndexCase::Pair { single: s, .. } => -2.0 * d2 * g[s],
            IndexCase::Distinct { i, j, k } => {
                -d3 * (g[i] * g[j] * g[k]
                    + g[i] * gc[(j, k)]
                    + g[j] * gc[(k, i)]
                    + g[k] * gc[(i, j)]
                    + zeta_third.get(i, j, k))
            }
        },
        SamplerKind::ClippedSgld => {
            return Err(Error::InvalidParameter(
                "third-moment formulas cover sgld and sglrw".into(),
            ))
        }
    })
}

/// Monte-Carlo E[Δθᵢ Δθⱼ Δθₖ | θ] with ζ drawn from `noise_model` per step.
///
/// Returns (estimate, standard error). Errors if any draw leaves the
/// unclipped lattice regime.
pub fn third_moment_monte_carlo(
    kind: SamplerKind,
    theta: &[f64],
    grad: &[f64],
    noise_model: &SyntheticNoiseModel,
    step: f64,
    indices: (usize, usize, usize),
    n_samples: u64,
    rng: &mut ChainRng,
) -> Result<(f64, f64)> {
    let d = grad.len();
    if theta.len() != d || noise_model.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta.len().min(noise_model.dim()),
        });
    }
    if !(step > 0.0) || n_samples == 0 {
        return Err(Error::InvalidParameter(
            "step and n_samples must be positive".into(),
        ));
    }
    let (i, j, k) = indices;
    classify(indices, d)?;
    let lattice = (2.0 * step).sqrt();
    let tilt = (step / 2.0).sqrt();
    let mut delta = vec![0.0; d];
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n_samples {
        let zeta = sample_synthetic_noise(rng, noise_model);
        match kind {
            SamplerKind::Sgld => {
                for (m, dm) in delta.iter_mut().enumerate() {
                    let xi: f64 = rng.sample(StandardNormal);
                    *dm = -step * (grad[m] + zeta[m]) + lattice * xi;
                }
            }
            SamplerKind::Sglrw => {
                for (m, dm) in delta.iter_mut().enumerate() {
                    let tilted = grad[m] + zeta[m];
                    if (tilt * tilted).abs() > 1.0 {
                        return Err(Error::ClippedRegime);
                    }
                    let (p_plus, _) = lrw_transition_prob(tilted, step);
                    let u: f64 = rng.random();
                    *dm = if u < p_plus { lattice } else { -lattice };
                }
            }
            SamplerKind::ClippedSgld => {
                return Err(Error::InvalidParameter(
                    "third-moment formulas cover sgld and sglrw".into(),
                ))
            }
        }
        let v = delta[i] * delta[j] * delta[k];
        sum += v;
        sumsq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Monte-Carlo estimate of s = E[min(ξ², 1)] for standard normal ξ, paired
/// with its closed form 1 − √(2/π)·e^{−1/2} ≈ 0.516.
///
/// Full-increment clipping shrinks the limiting diffusion covariance by this
/// factor, which is why only the drift is clipped in `clipped_sgld_step`.
#[derive(Clone, Copy, Debug)]
pub struct ClipConstantEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub closed_form: f64,
}

pub fn clipped_increment_covariance_constant(
    n_samples: u64,
    rng: &mut ChainRng,
) -> Result<ClipConstantEstimate> {
    if n_samples < 10_000 {
        return Err(Error::TooFewSamples {
            needed: 10_000,
            got: n_samples as usize,
        });
    }
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n_samples {
        let xi: f64 = rng.sample(StandardNormal);
        let v = (xi * xi).min(1.0);
        sum += v;
        sumsq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    let closed_form = 1.0 - (2.0 / std::f64::consts::PI).sqrt() * (-0.5f64).exp();
    Ok(ClipConstantEstimate {
        estimate: mean,
        std_error: (var / n).sqrt(),
        closed_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::derive_chain_stream;
    use proptest::prelude::*;

    #[test]
    fn mn_sgld_example_matrix() {
        // ∇U = (1,0), ζ = (0,1) ⇒ [[0,1],[1,1]].
        let m = mn_sgld_analytic(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let e = m.matrix();
        assert_eq!(
            [e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]],
            [0.0, 1.0, 1.0, 1.0]
        );
    }

    #[test]
    fn mn_sglrw_example_matrix() {
        let m = mn_sglrw_analytic(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let e = m.matrix();
        assert_eq!(
            [e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]],
            [0.0, 1.0, 1.0, 0.0]
        );
    }

    #[test]
    fn mn_zero_zeta_is_zero() {
        let m = mn_sgld_analytic(&[0.7, -0.3, 0.1], &[0.0; 3]).unwrap();
        assert_eq!(m.frobenius_norm(), 0.0);
    }

    #[test]
    fn lemma_equivalence_on_random_tuples() {
        // 200 random (∇U, ζ, d ≤ 5) tuples: offdiag(M_SGLD) = M_SGLRW exactly.
        let mut rng = derive_chain_stream(301, 0);
        for trial in 0..200 {
            let d = 1 + (trial % 5);
            let grad: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let zeta: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let sgld = mn_sgld_analytic(&grad, &zeta).unwrap();
            let sglrw = mn_sglrw_analytic(&grad, &zeta).unwrap();
            for i in 0..d {
                for j in 0..d {
                    let expected = if i == j { 0.0 } else { sgld.matrix()[(i, j)] };
                    assert_eq!(sglrw.matrix()[(i, j)], expected);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn mn_is_symmetric_and_offdiag_shrinks_norm(
            grad in proptest::collection::vec(-5.0f64..5.0, 3),
            zeta in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let sgld = mn_sgld_analytic(&grad, &zeta).unwrap();
            let sglrw = mn_sglrw_analytic(&grad, &zeta).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(sgld.matrix()[(i, j)], sgld.matrix()[(j, i)]);
                }
            }
            prop_assert!(sglrw.frobenius_norm() <= sgld.frobenius_norm());
            // ‖M_SGLD‖² − ‖M_SGLRW‖² = Σᵢ (2∂ᵢU·ζᵢ + ζᵢ²)²; strict whenever the
            // diagonal is non-negligible at f64 resolution.
            let diag_sq: f64 = (0..3)
                .map(|i| (2.0 * grad[i] * zeta[i] + zeta[i] * zeta[i]).powi(2))
                .sum();
            let sgld_sq = sgld.frobenius_norm().powi(2);
            if diag_sq > 1e-9 * (1.0 + sgld_sq) {
                prop_assert!(sglrw.frobenius_norm() < sgld.frobenius_norm());
            }
        }
    }

    #[test]
    fn mn_monte_carlo_agrees_with_analytic_smoke() {
        let grad = [0.9, -0.4];
        let zeta = [-0.6, 0.8];
        let theta = [0.0, 0.0];
        let step = 1e-2;
        let n = 400_000;
        for kind in [SamplerKind::Sgld, SamplerKind::Sglrw] {
            let mut rng = derive_chain_stream(302, kind as u64);
            let mc = mn_monte_carlo(kind, &theta, &grad, &zeta, step, n, &mut rng).unwrap();
            let analytic = match kind {
                SamplerKind::Sgld => mn_sgld_analytic(&grad, &zeta).unwrap(),
                _ => mn_sglrw_analytic(&grad, &zeta).unwrap(),
            };
            for i in 0..2 {
                for j in 0..2 {
                    let gap = (mc.estimate[(i, j)] - analytic.matrix()[(i, j)]).abs();
                    let se = mc.std_error[(i, j)];
                    if se == 0.0 {
                        assert_eq!(gap, 0.0, "{kind:?} deterministic entry ({i},{j})");
                    } else {
                        assert!(gap <= 3.0 * se, "{kind:?} entry ({i},{j}): gap {gap}, se {se}");
                    }
                }
            }
            if kind == SamplerKind::Sglrw {
                for i in 0..2 {
                    assert_eq!(mc.estimate[(i, i)], 0.0);
                    assert_eq!(mc.std_error[(i, i)], 0.0);
                }
            }
        }
    }

    #[test]
    fn mn_monte_carlo_zero_zeta_sgld_is_exact_zero() {
        // Shared ξ makes the paired increments identical when ζ = 0.
        let mut rng = derive_chain_stream(303, 0);
        let mc = mn_monte_carlo(
            SamplerKind::Sgld,
            &[0.0, 0.0],
            &[0.5, -0.5],
            &[0.0, 0.0],
            1e-2,
            10_000,
            &mut rng,
        )
        .unwrap();
        assert_eq!(mc.estimate.norm(), 0.0);
    }

    #[test]
    fn mn_monte_carlo_rejects_clipped_inputs() {
        let mut rng = derive_chain_stream(304, 0);
        let r = mn_monte_carlo(
            SamplerKind::Sglrw,
            &[0.0],
            &[100.0],
            &[0.0],
            1.0,
            1000,
            &mut rng,
        );
        assert!(matches!(r, Err(Error::ClippedRegime)));
    }

    #[test]
    fn third_moment_analytic_substitutions() {
        let g = [1.3, -0.7, 0.4];
        let zero_g = DMatrix::<f64>::zeros(3, 3);
        let step = 1e-2;
        let d2 = step * step;
        let d3 = d2 * step;
        // SGLRW, i=j=k: −2δ²∂ᵢU.
        let v = third_moment_analytic(
            SamplerKind::Sglrw,
            &g,
            &ZetaThirdMoments::Zero,
            &zero_g,
            step,
            (1, 1, 1),
        )
        .unwrap();
        assert_eq!(v, -2.0 * d2 * g[1]);
        // SGLRW, distinct, ζ ≡ 0: −δ³∂ᵢU∂ⱼU∂ₖU.
        let v = third_moment_analytic(
            SamplerKind::Sglrw,
            &g,
            &ZetaThirdMoments::Zero,
            &zero_g,
            step,
            (0, 1, 2),
        )
        .unwrap();
        assert!((v + d3 * g[0] * g[1] * g[2]).abs() < 1e-18);
        // SGLD, i=j=k, ζ ≡ 0: −6δ²∂ᵢU − δ³(∂ᵢU)³.
        let v = third_moment_analytic(
            SamplerKind::Sgld,
            &g,
            &ZetaThirdMoments::Zero,
            &zero_g,
            step,
            (2, 2, 2),
        )
        .unwrap();
        assert!((v - (-6.0 * d2 * g[2] - d3 * g[2].powi(3))).abs() < 1e-18);
        // Pair case is symmetric in the index pattern.
        for idx in [(0, 0, 2), (0, 2, 0), (2, 0, 0)] {
            let v = third_moment_analytic(
                SamplerKind::Sglrw,
                &g,
                &ZetaThirdMoments::Zero,
                &zero_g,
                step,
                idx,
            )
            .unwrap();
            assert_eq!(v, -2.0 * d2 * g[2]);
        }
    }

    #[test]
    fn third_moment_monte_carlo_matches_analytic_smoke() {
        let g = [1.2, -0.8, 0.5];
        let theta = [0.0; 3];
        let noise = SyntheticNoiseModel::isotropic_gaussian(3, 0.5);
        let g_cov = noise.covariance();
        let step = 1e-2;
        let n = 1_000_000;
        for kind in [SamplerKind::Sgld, SamplerKind::Sglrw] {
            for indices in [(0, 0, 0), (1, 1, 2), (0, 1, 2)] {
                let mut rng = derive_chain_stream(305, (kind as u64) * 10 + indices.2 as u64);
                let (est, se) = third_moment_monte_carlo(
                    kind, &theta, &g, &noise, step, indices, n, &mut rng,
                )
                .unwrap();
                let analytic = third_moment_analytic(
                    kind,
                    &g,
                    &ZetaThirdMoments::Zero,
                    &g_cov,
                    step,
                    indices,
                )
                .unwrap();
                assert!(
                    (est - analytic).abs() <= 3.0 * se,
                    "{kind:?} {indices:?}: est {est}, analytic {analytic}, se {se}"
                );
            }
        }
    }

    #[test]
    fn sglrw_diagonal_cube_is_noise_independent_and_scales_quartically() {
        let g = [1.5];
        let theta = [0.0];
        let step = 4e-3;
        let n = 1_000_000;
        let small = SyntheticNoiseModel::isotropic_gaussian(1, 0.3);
        let large = SyntheticNoiseModel::isotropic_gaussian(1, 0.7);
        let mut rng = derive_chain_stream(306, 0);
        let (a, se_a) =
            third_moment_monte_carlo(SamplerKind::Sglrw, &theta, &g, &small, step, (0, 0, 0), n, &mut rng)
                .unwrap();
        let (b, se_b) =
            third_moment_monte_carlo(SamplerKind::Sglrw, &theta, &g, &large, step, (0, 0, 0), n, &mut rng)
                .unwrap();
        let combined = (se_a * se_a + se_b * se_b).sqrt();
        assert!((a - b).abs() <= 3.0 * combined, "a {a}, b {b}");

        // δ → 4δ scales the i=j=k entry by 16.
        let (c, se_c) = third_moment_monte_carlo(
            SamplerKind::Sglrw,
            &theta,
            &g,
            &small,
            4.0 * step,
            (0, 0, 0),
            n,
            &mut rng,
        )
        .unwrap();
        let expected = -2.0 * (4.0 * step) * (4.0 * step) * g[0];
        assert!((c - expected).abs() <= 3.0 * se_c, "c {c} vs {expected}");
        let ratio_analytic = third_moment_analytic(
            SamplerKind::Sglrw,
            &g,
            &ZetaThirdMoments::Zero,
            &small.covariance(),
            4.0 * step,
            (0, 0, 0),
        )
        .unwrap()
            / third_moment_analytic(
                SamplerKind::Sglrw,
                &g,
                &ZetaThirdMoments::Zero,
                &small.covariance(),
                step,
                (0, 0, 0),
            )
            .unwrap();
        assert!((ratio_analytic - 16.0).abs() < 1e-12);
    }

    #[test]
    fn clip_constant_closed_form_and_monte_carlo() {
        let mut rng = derive_chain_stream(307, 0);
        let est = clipped_increment_covariance_constant(1_000_000, &mut rng).unwrap();
        assert!((est.closed_form - 0.5160585509617133).abs() < 1e-12);
        assert!((est.estimate - 0.516).abs() < 0.002, "mc = {}", est.estimate);
        assert!(est.estimate > 0.0 && est.estimate < 1.0);
        assert!(clipped_increment_covariance_constant(100, &mut rng).is_err());
    }
}
