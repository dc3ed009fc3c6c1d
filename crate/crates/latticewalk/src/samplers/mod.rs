//! One-step update rules and chain drivers.
//!
//! Three update rules share the minibatch gradient estimate
//! ∇̂U(θ;B) = −∇log p(θ) − (N/B)·Σ_{i∈B} ∇log p(yᵢ|xᵢ,θ):
//!
//! - `sgld_step`:        θ' = θ − δ·∇̂U + √(2δ)·ξ,  ξ ~ N(0, I)
//! - `clipped_sgld_step`: the drift δ·∇̂U is clamped componentwise to
//!   magnitude √(2δ) before the same Gaussian injection
//! - `sglrw_step`:       every coordinate moves by exactly ±√(2δ); the sign
//!   is drawn from `lrw_transition_prob`, which tilts a fair coin by
//!   √(δ/2)·∇̂ᵢU (clamped to ±1)
//!
//! SGLD can produce non-finite states under large steps; such chains are
//! flagged as diverged and halted. SGLRW increments are bounded, so a chain
//! started at a finite point stays finite.

use crate::models::TargetModel;
use crate::noise::{draw_minibatch, NoiseSpec};
use crate::schedule::StepSchedule;
use crate::stream::{derive_substream, ChainRng, StreamLane};
use crate::{Error, ParamVector, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    Sgld,
    Sglrw,
    ClippedSgld,
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Sgld => "sgld",
            SamplerKind::Sglrw => "sglrw",
            SamplerKind::ClippedSgld => "clipped_sgld",
        }
    }

    pub fn parse(s: &str) -> Option<SamplerKind> {
        match s {
            "sgld" => Some(SamplerKind::Sgld),
            "sglrw" => Some(SamplerKind::Sglrw),
            "clipped_sgld" => Some(SamplerKind::ClippedSgld),
            _ => None,
        }
    }
}

/// Chain state: current point θ_t, iteration count, divergence marker.
#[derive(Clone, Debug)]
pub struct SamplerState {
    pub params: ParamVector,
    pub iteration: u64,
    pub diverged: bool,
}

impl SamplerState {
    pub fn new(params: ParamVector) -> Self {
        SamplerState {
            params,
            iteration: 0,
            diverged: false,
        }
    }
}

/// The N/B-rescaled unbiased minibatch gradient estimator.
///
/// Equals `full_gradient` exactly (same accumulation order) when `batch` is
/// the full index set in ascending order.
pub fn minibatch_grad_estimate(
    model: &dyn TargetModel,
    params: &ParamVector,
    batch: &[usize],
) -> Result<ParamVector> {
    if params.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: params.dim(),
        });
    }
    let mut out = ParamVector::zeros(model.dim());
    minibatch_grad_into(model, params, batch, out.as_mut_slice())?;
    Ok(out)
}

fn minibatch_grad_into(
    model: &dyn TargetModel,
    params: &[f64],
    batch: &[usize],
    out: &mut [f64],
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = model.data_len();
    for &i in batch {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
    }
    let scale = n as f64 / batch.len() as f64;
    out.fill(0.0);
    model.accumulate_prior_log_grad(params, out);
    for &i in batch {
        model.accumulate_datum_log_grad(params, i, scale, out);
    }
    for v in out.iter_mut() {
        *v = -*v;
    }
    Ok(())
}

/// Lattice sign probabilities (p₊, p₋) for one coordinate.
///
/// p₊ = ½ − a/2, p₋ = ½ + a/2 with a = clamp(√(δ/2)·g, −1, 1), so both lie in
/// [0, 1] and sum to 1 for every real gradient value. A NaN gradient falls
/// back to the unbiased coin.
pub fn lrw_transition_prob(grad_component: f64, step: f64) -> (f64, f64) {
    debug_assert!(step > 0.0);
    let mut a = ((step / 2.0).sqrt() * grad_component).clamp(-1.0, 1.0);
    if a.is_nan() {
        a = 0.0;
    }
    (0.5 - 0.5 * a, 0.5 + 0.5 * a)
}

#[inline]
fn apply_sgld(params: &mut [f64], grad: &[f64], step: f64, rng: &mut ChainRng) -> bool {
    let noise = (2.0 * step).sqrt();
    let mut finite = true;
    for (p, g) in params.iter_mut().zip(grad) {
        let xi: f64 = rng.sample(StandardNormal);
        *p = *p - step * g + noise * xi;
        finite &= p.is_finite();
    }
    finite
}

#[inline]
fn apply_clipped_sgld(params: &mut [f64], grad: &[f64], step: f64, rng: &mut ChainRng) -> bool {
    let bound = (2.0 * step).sqrt();
    let mut finite = true;
    for (p, g) in params.iter_mut().zip(grad) {
        let xi: f64 = rng.sample(StandardNormal);
        let drift = (step * g).clamp(-bound, bound);
        *p = *p - drift + bound * xi;
        finite &= p.is_finite();
    }
    finite
}

#[inline]
fn apply_sglrw(params: &mut [f64], grad: &[f64], step: f64, rng: &mut ChainRng) {
    let lattice = (2.0 * step).sqrt();
    for (p, g) in params.iter_mut().zip(grad) {
        let (p_plus, _) = lrw_transition_prob(*g, step);
        let u: f64 = rng.random();
        *p += if u < p_plus { lattice } else { -lattice };
    }
}

/// SGLD: θ' = θ − δ·∇̂U(θ;B) + √(2δ)·ξ. Non-finite results set `diverged`.
pub fn sgld_step(
    state: &mut SamplerState,
    model: &dyn TargetModel,
    batch: &[usize],
    step: f64,
    rng: &mut ChainRng,
) -> Result<()> {
    let grad = minibatch_grad_estimate(model, &state.params, batch)?;
    if !apply_sgld(state.params.as_mut_slice(), &grad, step, rng) {
        state.diverged = true;
    }
    state.iteration += 1;
    Ok(())
}

/// Clipped SGLD: drift clamped componentwise to √(2δ), noise unclipped.
pub fn clipped_sgld_step(
    state: &mut SamplerState,
    model: &dyn TargetModel,
    batch: &[usize],
    step: f64,
    rng: &mut ChainRng,
) -> Result<()> {
    let grad = minibatch_grad_estimate(model, &state.params, batch)?;
    if !apply_clipped_sgld(state.params.as_mut_slice(), &grad, step, rng) {
        state.diverged = true;
    }
    state.iteration += 1;
    Ok(())
}

/// SGLRW: each coordinate moves by exactly ±√(2δ), signs drawn independently
/// from `lrw_transition_prob` applied to the shared minibatch gradient.
pub fn sglrw_step(
    state: &mut SamplerState,
    model: &dyn TargetModel,
    batch: &[usize],
    step: f64,
    rng: &mut ChainRng,
) -> Result<()> {
    let grad = minibatch_grad_estimate(model, &state.params, batch)?;
    apply_sglrw(state.params.as_mut_slice(), &grad, step, rng);
    state.iteration += 1;
    Ok(())
}

/// How the chain driver obtains its per-step gradient estimate.
#[derive(Clone, Debug)]
pub enum GradientSource {
    /// Fresh uniform minibatch of the given size at every step.
    Minibatch { batch_size: usize },
    /// Exact gradient plus synthetic i.i.d. noise per coordinate (the
    /// heavy-tailed-noise experiment). The corruption is drawn from the
    /// minibatch stream lane so matched-seed samplers see identical noise.
    Corrupted { spec: NoiseSpec },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Retain {
    AllPostBurnin,
    FinalOnly,
}

/// Chain bookkeeping. Identical config + model + sampler gives bitwise
/// identical output regardless of thread layout.
#[derive(Clone, Debug)]
pub struct ChainConfig {
    pub n_chains: usize,
    pub n_iters: u64,
    pub burn_in: u64,
    pub master_seed: u64,
    pub retain: Retain,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.n_iters == 0 {
            return Err(Error::InvalidParameter(
                "n_chains and n_iters must be positive".into(),
            ));
        }
        if self.burn_in >= self.n_iters {
            return Err(Error::InvalidParameter(format!(
                "burn_in {} must be < n_iters {}",
                self.burn_in, self.n_iters
            )));
        }
        Ok(())
    }
}

/// Samples retained from one chain plus its divergence record.
///
/// A diverged chain stops at the recorded iteration and retains nothing; its
/// exclusion from diagnostics is the caller's policy.
#[derive(Clone, Debug)]
pub struct ChainResult {
    pub samples: Vec<ParamVector>,
    pub diverged_at: Option<u64>,
}

/// Runs one chain from θ₀ = 0 with a fresh minibatch per step.
pub fn run_chain(
    kind: SamplerKind,
    model: &dyn TargetModel,
    schedule: &StepSchedule,
    config: &ChainConfig,
    batch_size: usize,
    chain_index: u64,
) -> Result<ChainResult> {
    run_chain_from(
        kind,
        model,
        schedule,
        config,
        &GradientSource::Minibatch { batch_size },
        chain_index,
        &ParamVector::zeros(model.dim()),
    )
}

/// Runs one chain from an explicit initial point.
pub fn run_chain_from(
    kind: SamplerKind,
    model: &dyn TargetModel,
    schedule: &StepSchedule,
    config: &ChainConfig,
    source: &GradientSource,
    chain_index: u64,
    init: &ParamVector,
) -> Result<ChainResult> {
    config.validate()?;
    if init.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: init.dim(),
        });
    }
    if !init.all_finite() {
        return Err(Error::InvalidParameter("non-finite initial point".into()));
    }
    let n = model.data_len();
    if let GradientSource::Minibatch { batch_size } = source {
        if *batch_size == 0 {
            return Err(Error::EmptyBatch);
        }
        if *batch_size > n {
            return Err(Error::BatchTooLarge {
                batch: *batch_size,
                data: n,
            });
        }
    }

    let mut batch_rng = derive_substream(config.master_seed, chain_index, StreamLane::Minibatch);
    let mut noise_rng = derive_substream(config.master_seed, chain_index, StreamLane::Noise);

    let d = model.dim();
    let mut params = init.clone();
    let mut grad = vec![0.0; d];
    let retained_cap = match config.retain {
        Retain::AllPostBurnin => (config.n_iters - config.burn_in) as usize,
        Retain::FinalOnly => 1,
    };
    let mut samples = Vec::with_capacity(retained_cap);
    let mut diverged_at = None;

    for t in 0..config.n_iters {
        let step = schedule.step_size(t);
        match source {
            GradientSource::Minibatch { batch_size } => {
                if *batch_size == n {
                    model.fast_full_grad_into(&params, &mut grad);
                } else {
                    let batch = draw_minibatch(&mut batch_rng, n, *batch_size)?;
                    minibatch_grad_into(model, &params, &batch, &mut grad)?;
                }
            }
            GradientSource::Corrupted { spec } => {
                model.fast_full_grad_into(&params, &mut grad);
                for g in grad.iter_mut() {
                    *g += spec.sample(&mut batch_rng);
                }
            }
        }
        let finite = match kind {
            SamplerKind::Sgld => apply_sgld(&mut params, &grad, step, &mut noise_rng),
            SamplerKind::ClippedSgld => {
                apply_clipped_sgld(&mut params, &grad, step, &mut noise_rng)
            }
            SamplerKind::Sglrw => {
                apply_sglrw(&mut params, &grad, step, &mut noise_rng);
                true
            }
        };
        if !finite {
            diverged_at = Some(t);
            break;
        }
        if config.retain == Retain::AllPostBurnin && t >= config.burn_in {
            samples.push(params.clone());
        }
    }
    if diverged_at.is_none() && config.retain == Retain::FinalOnly {
        samples.push(params);
    }
    if diverged_at.is_some() {
        samples.clear();
    }
    Ok(ChainResult {
        samples,
        diverged_at,
    })
}

/// All chains of a parallel run, in chain-index order.
#[derive(Debug)]
pub struct ParallelRun {
    pub chains: Vec<ChainResult>,
    pub diverged_chains: Vec<usize>,
}

impl ParallelRun {
    /// Flattens the retained samples of non-diverged chains, chain order.
    pub fn pooled_samples(&self) -> Vec<ParamVector> {
        self.chains
            .iter()
            .filter(|c| c.diverged_at.is_none())
            .flat_map(|c| c.samples.iter().cloned())
            .collect()
    }
}

/// Runs `config.n_chains` independent chains from θ₀ = 0.
pub fn run_parallel_chains(
    kind: SamplerKind,
    model: &dyn TargetModel,
    schedule: &StepSchedule,
    config: &ChainConfig,
    batch_size: usize,
) -> Result<ParallelRun> {
    run_parallel_chains_from(
        kind,
        model,
        schedule,
        config,
        &GradientSource::Minibatch { batch_size },
        &ParamVector::zeros(model.dim()),
    )
}

/// Parallel chains from a shared initial point. Per-chain streams are derived
/// from (master_seed, chain_index), so the result is independent of the
/// worker count; chains are collected in index order.
pub fn run_parallel_chains_from(
    kind: SamplerKind,
    model: &dyn TargetModel,
    schedule: &StepSchedule,
    config: &ChainConfig,
    source: &GradientSource,
    init: &ParamVector,
) -> Result<ParallelRun> {
    run_parallel_chains_with_init(kind, model, schedule, config, source, |_| init.clone())
}

/// Parallel chains with a per-chain initial point, e.g. a dispersed particle
/// cloud. `init(c)` must be a pure function of the chain index.
pub fn run_parallel_chains_with_init<F>(
    kind: SamplerKind,
    model: &dyn TargetModel,
    schedule: &StepSchedule,
    config: &ChainConfig,
    source: &GradientSource,
    init: F,
) -> Result<ParallelRun>
where
    F: Fn(u64) -> ParamVector + Sync,
{
    config.validate()?;
    let chains: Result<Vec<ChainResult>> = (0..config.n_chains as u64)
        .into_par_iter()
        .map(|c| run_chain_from(kind, model, schedule, config, source, c, &init(c)))
        .collect();
    let chains = chains?;
    let diverged_chains = chains
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.diverged_at.map(|_| i))
        .collect();
    Ok(ParallelRun {
        chains,
        diverged_chains,
    })
}

/// Long full-batch SGLD chain at a small fixed step, thinned.
///
/// Desk-scale reference distribution for targets without a closed-form
/// posterior. Divergence at the chosen step is an error, not a flag.
pub fn reference_chain(
    model: &dyn TargetModel,
    fine_step: f64,
    long_length: u64,
    thin: u64,
    rng: &mut ChainRng,
) -> Result<Vec<ParamVector>> {
    if !(fine_step > 0.0) || long_length == 0 || thin == 0 {
        return Err(Error::InvalidParameter(
            "fine_step, long_length and thin must be positive".into(),
        ));
    }
    let d = model.dim();
    let mut params = ParamVector::zeros(d);
    let mut grad = vec![0.0; d];
    let mut samples = Vec::with_capacity((long_length / thin) as usize);
    for t in 0..long_length {
        model.fast_full_grad_into(&params, &mut grad);
        if !apply_sgld(&mut params, &grad, fine_step, rng) {
            return Err(Error::ReferenceDiverged(t));
        }
        if (t + 1) % thin == 0 {
            samples.push(params.clone());
        }
    }
    Ok(samples)
}
