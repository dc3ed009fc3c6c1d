//! Experiment dispatch: runs the configured grid and emits CSV rows.
//!
//! Matched protocol: within one grid point (B, δ₀, seed) every sampler uses
//! the same master seed, so chains consume identical minibatch index
//! sequences (the minibatch stream lane is sampler-independent) and matched
//! schedules; only the update rule differs. Rows are buffered in grid order,
//! so output is byte-deterministic for a fixed seed.
//!
//! The `runtime_s` column is 0.000 unless timings are explicitly requested;
//! wall-clock values would break byte-for-byte reproducibility.

use super::config::{ExperimentConfig, ExperimentKind, HarnessError, HarnessResult};
use crate::diagnostics::{
    clipped_increment_covariance_constant, empirical_gaussian_fit, gaussian_kl,
    histogram_tv_distance, mn_monte_carlo, mn_sgld_analytic, mn_sglrw_analytic,
    third_moment_analytic, third_moment_monte_carlo, ZetaThirdMoments,
};
use crate::models::{
    GaussianSummary, LinearGaussianModel, LogisticModel, Mixture1DModel, TargetModel,
};
use crate::noise::{NoiseSpec, SyntheticNoiseModel};
use crate::samplers::{
    reference_chain, run_parallel_chains_from, ChainConfig, GradientSource, ParallelRun,
    SamplerKind,
};
use crate::schedule::{ScheduleMode, StepSchedule};
use crate::stream::{derive_substream, mix_seed, StreamLane};
use crate::ParamVector;
use std::time::Instant;

const DATA_LABEL: u64 = 0x6c77_0001;
const REFERENCE_LABEL: u64 = 0x6c77_0002;
const MOMENT_LABEL: u64 = 0x6c77_0003;

/// CSV output of one experiment run.
#[derive(Clone, Debug)]
pub struct Report {
    pub experiment: ExperimentKind,
    pub header: &'static str,
    pub rows: Vec<String>,
    /// moment_check / clip_constant rows with pass=false.
    pub failed_checks: usize,
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(self.header);
        out.push('\n');
        for row in &self.rows {
            out.push_str(row);
            out.push('\n');
        }
        out
    }
}

const POSTERIOR_HEADER: &str = "experiment,sampler,d,N,batch_size,base_step,seed,n_chains,n_iters,kl_fit_true,kl_true_fit,frob_error,diverged_count,runtime_s";
const HEAVY_HEADER: &str = "experiment,sampler,alpha,noise_scale,base_step,seed,n_chains,n_iters,tv_distance,diverged_count,runtime_s";
const MOMENT_HEADER: &str = "experiment,check,scheme,index_case,estimate,analytic,se,z_score,pass";
const CLIP_HEADER: &str = "experiment,n_samples,estimate,se,closed_form,abs_error,pass";

/// Runs the configured experiment and returns its CSV report.
pub fn run_experiment(cfg: &ExperimentConfig, timings: bool) -> HarnessResult<Report> {
    cfg.validate().map_err(|m| HarnessError::Config {
        path: "<config>".into(),
        line: 0,
        message: m,
    })?;
    match cfg.experiment {
        ExperimentKind::Linreg | ExperimentKind::MseSweep => run_linreg_like(cfg, timings),
        ExperimentKind::Logreg => run_logreg(cfg, timings),
        ExperimentKind::Heavy1d => run_heavy1d(cfg, timings),
        ExperimentKind::MomentCheck => run_moment_check(cfg),
        ExperimentKind::ClipConstant => run_clip_constant(cfg),
    }
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.6e}")
    }
}

fn make_schedule(cfg: &ExperimentConfig, base: f64) -> StepSchedule {
    match cfg.schedule_mode {
        ScheduleMode::Decaying => StepSchedule::with_exponent(base, cfg.decay_exponent),
        ScheduleMode::Fixed => StepSchedule::fixed(base),
    }
}

fn grid_label(a: usize, b: usize, c: usize) -> u64 {
    ((a as u64) << 42) | ((b as u64) << 21) | c as u64
}

/// KL both ways, Frobenius error, diverged count for one parallel run.
///
/// Diverged chains are dropped; a run with more than 50% divergence (or too
/// few surviving samples to fit) reports infinite metrics.
fn posterior_metrics(
    run: &ParallelRun,
    truth: &GaussianSummary,
    n_chains: usize,
) -> (f64, f64, f64, usize) {
    let diverged = run.diverged_chains.len();
    let inf = f64::INFINITY;
    if diverged * 2 > n_chains {
        return (inf, inf, inf, diverged);
    }
    let samples = run.pooled_samples();
    match empirical_gaussian_fit(&samples) {
        Ok(fit) => {
            let kl_ft = gaussian_kl(&fit, truth).unwrap_or(inf);
            let kl_tf = gaussian_kl(truth, &fit).unwrap_or(inf);
            let frob = (fit.covariance() - truth.covariance()).norm();
            (kl_ft, kl_tf, frob, diverged)
        }
        Err(_) => (inf, inf, inf, diverged),
    }
}

fn posterior_grid_rows(
    cfg: &ExperimentConfig,
    model: &dyn TargetModel,
    truth: &GaussianSummary,
    timings: bool,
) -> HarnessResult<Vec<String>> {
    let name = cfg.experiment.name();
    let n = model.data_len();
    let init = ParamVector::zeros(model.dim());
    let mut rows = Vec::new();
    for (bi, &b) in cfg.batch_sizes.iter().enumerate() {
        let b_eff = b.min(n);
        if b_eff != b {
            eprintln!("[{name}] batch_size {b} exceeds N={n}; clamped to full batch");
        }
        for (si, &base) in cfg.base_steps.iter().enumerate() {
            let schedule = make_schedule(cfg, base);
            for (qi, &seed) in cfg.seeds.iter().enumerate() {
                let chain_cfg = ChainConfig {
                    n_chains: cfg.n_chains,
                    n_iters: cfg.n_iters,
                    burn_in: cfg.burn_in,
                    master_seed: mix_seed(seed, grid_label(bi, si, qi)),
                    retain: cfg.retain,
                };
                for &kind in &cfg.samplers {
                    let started = Instant::now();
                    let run = run_parallel_chains_from(
                        kind,
                        model,
                        &schedule,
                        &chain_cfg,
                        &GradientSource::Minibatch { batch_size: b_eff },
                        &init,
                    )?;
                    let (kl_ft, kl_tf, frob, diverged) =
                        posterior_metrics(&run, truth, cfg.n_chains);
                    let elapsed = started.elapsed().as_secs_f64();
                    if diverged > 0 {
                        eprintln!(
                            "[{name}] {} B={b} step={base:e} seed={seed}: {diverged}/{} chains diverged",
                            kind.name(),
                            cfg.n_chains
                        );
                    }
                    rows.push(format!(
                        "{name},{},{},{},{},{:e},{},{},{},{},{},{},{},{}",
                        kind.name(),
                        model.dim(),
                        n,
                        b,
                        base,
                        seed,
                        cfg.n_chains,
                        cfg.n_iters,
                        fmt(kl_ft),
                        fmt(kl_tf),
                        fmt(frob),
                        diverged,
                        runtime_cell(elapsed, timings),
                    ));
                }
            }
        }
    }
    Ok(rows)
}

fn runtime_cell(elapsed: f64, timings: bool) -> String {
    if timings {
        format!("{elapsed:.3}")
    } else {
        "0.000".into()
    }
}

fn run_linreg_like(cfg: &ExperimentConfig, timings: bool) -> HarnessResult<Report> {
    let mut data_rng = derive_substream(mix_seed(cfg.seeds[0], DATA_LABEL), 0, StreamLane::Chain);
    let (model, _) = LinearGaussianModel::synthetic(
        cfg.data_size,
        cfg.dimension,
        cfg.noise_variance,
        cfg.prior_precision,
        &mut data_rng,
    )?;
    let truth = model.analytic_posterior()?;
    let rows = posterior_grid_rows(cfg, &model, &truth, timings)?;
    Ok(Report {
        experiment: cfg.experiment,
        header: POSTERIOR_HEADER,
        rows,
        failed_checks: 0,
    })
}

fn run_logreg(cfg: &ExperimentConfig, timings: bool) -> HarnessResult<Report> {
    let model = match &cfg.dataset {
        Some(path) => {
            let (features, labels, d) = crate::models::load_numeric_matrix(path)?;
            LogisticModel::new(features, labels, d, cfg.prior_precision)?
        }
        None => {
            let mut data_rng =
                derive_substream(mix_seed(cfg.seeds[0], DATA_LABEL), 0, StreamLane::Chain);
            LogisticModel::synthetic_blobs(
                cfg.data_size,
                cfg.dimension,
                cfg.separation,
                cfg.prior_precision,
                &mut data_rng,
            )?
        }
    };
    // No closed form here: a long full-batch fine-step chain is the reference.
    let mut ref_rng =
        derive_substream(mix_seed(cfg.seeds[0], REFERENCE_LABEL), 0, StreamLane::Chain);
    let reference = reference_chain(
        &model,
        cfg.reference_step,
        cfg.reference_length,
        cfg.reference_thin,
        &mut ref_rng,
    )?;
    let truth = empirical_gaussian_fit(&reference)?;
    let rows = posterior_grid_rows(cfg, &model, &truth, timings)?;
    Ok(Report {
        experiment: cfg.experiment,
        header: POSTERIOR_HEADER,
        rows,
        failed_checks: 0,
    })
}

fn run_heavy1d(cfg: &ExperimentConfig, timings: bool) -> HarnessResult<Report> {
    let name = cfg.experiment.name();
    let edges: Vec<f64> = (0..=cfg.hist_bins)
        .map(|i| cfg.hist_min + (cfg.hist_max - cfg.hist_min) * i as f64 / cfg.hist_bins as f64)
        .collect();
    let init = ParamVector::zeros(1);
    let mut rows = Vec::new();
    for (sci, &scale) in cfg.noise_scales.iter().enumerate() {
        let spec = NoiseSpec::alpha_stable(cfg.alpha, scale)?;
        let model = Mixture1DModel::default_target(spec);
        for (si, &base) in cfg.base_steps.iter().enumerate() {
            let schedule = make_schedule(cfg, base);
            for (qi, &seed) in cfg.seeds.iter().enumerate() {
                let chain_cfg = ChainConfig {
                    n_chains: cfg.n_chains,
                    n_iters: cfg.n_iters,
                    burn_in: cfg.burn_in,
                    master_seed: mix_seed(seed, grid_label(sci, si, qi)),
                    retain: cfg.retain,
                };
                for &kind in &cfg.samplers {
                    let started = Instant::now();
                    let run = run_parallel_chains_from(
                        kind,
                        &model,
                        &schedule,
                        &chain_cfg,
                        &GradientSource::Corrupted {
                            spec: *model.noise_spec(),
                        },
                        &init,
                    )?;
                    let diverged = run.diverged_chains.len();
                    let flat: Vec<f64> = run
                        .pooled_samples()
                        .iter()
                        .map(|s| s[0])
                        .collect();
                    let tv = if flat.is_empty() {
                        f64::INFINITY
                    } else {
                        histogram_tv_distance(&flat, |x| model.density(x), &edges)?
                    };
                    let elapsed = started.elapsed().as_secs_f64();
                    if diverged > 0 {
                        eprintln!(
                            "[{name}] {} scale={scale} seed={seed}: {diverged}/{} chains diverged",
                            kind.name(),
                            cfg.n_chains
                        );
                    }
                    rows.push(format!(
                        "{name},{},{},{},{:e},{},{},{},{},{},{}",
                        kind.name(),
                        cfg.alpha,
                        scale,
                        base,
                        seed,
                        cfg.n_chains,
                        cfg.n_iters,
                        fmt(tv),
                        diverged,
                        runtime_cell(elapsed, timings),
                    ));
                }
            }
        }
    }
    Ok(Report {
        experiment: cfg.experiment,
        header: HEAVY_HEADER,
        rows,
        failed_checks: 0,
    })
}

struct CheckRow {
    check: &'static str,
    scheme: &'static str,
    index_case: String,
    estimate: f64,
    analytic: f64,
    se: f64,
}

impl CheckRow {
    /// z-band verdict; entries with zero SE must match exactly.
    fn pass(&self) -> bool {
        if self.se == 0.0 {
            self.estimate == self.analytic
        } else {
            ((self.estimate - self.analytic) / self.se).abs() <= 3.0
        }
    }

    fn z(&self) -> f64 {
        if self.se == 0.0 {
            0.0
        } else {
            ((self.estimate - self.analytic) / self.se).abs()
        }
    }

    fn render(&self, experiment: &str) -> String {
        format!(
            "{experiment},{},{},{},{},{},{},{},{}",
            self.check,
            self.scheme,
            self.index_case,
            fmt(self.estimate),
            fmt(self.analytic),
            fmt(self.se),
            fmt(self.z()),
            self.pass()
        )
    }
}

fn run_moment_check(cfg: &ExperimentConfig) -> HarnessResult<Report> {
    use rand::Rng;
    use rand_distr::StandardNormal;

    let d = cfg.dimension;
    let step = cfg.base_steps[0];
    let n = cfg.mc_samples;
    let seed = cfg.seeds[0];
    let mut rng = derive_substream(mix_seed(seed, MOMENT_LABEL), 0, StreamLane::Chain);
    let tilt = (step / 2.0).sqrt();
    let mut checks: Vec<CheckRow> = Vec::new();

    // Lemma 4.4: Monte-Carlo M_n against the closed forms, worst entry per
    // scheme and pair.
    for pair in 0..cfg.mc_pairs {
        let mut draw = || -> (Vec<f64>, Vec<f64>) {
            loop {
                let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let clipped = (0..d).any(|i| {
                    (tilt * g[i]).abs() > 1.0 || (tilt * (g[i] + z[i])).abs() > 1.0
                });
                if !clipped {
                    return (g, z);
                }
            }
        };
        let (grad, zeta) = draw();
        let theta = vec![0.0; d];
        for kind in [SamplerKind::Sgld, SamplerKind::Sglrw] {
            let mc = mn_monte_carlo(kind, &theta, &grad, &zeta, step, n, &mut rng)?;
            let analytic = match kind {
                SamplerKind::Sgld => mn_sgld_analytic(&grad, &zeta)?,
                _ => mn_sglrw_analytic(&grad, &zeta)?,
            };
            let mut worst = CheckRow {
                check: "lemma_4_4",
                scheme: kind.name(),
                index_case: format!("pair_{pair}"),
                estimate: mc.estimate[(0, 0)],
                analytic: analytic.matrix()[(0, 0)],
                se: mc.std_error[(0, 0)],
            };
            let mut worst_key = -1.0f64;
            for i in 0..d {
                for j in 0..d {
                    let row = CheckRow {
                        check: "lemma_4_4",
                        scheme: kind.name(),
                        index_case: format!("pair_{pair}"),
                        estimate: mc.estimate[(i, j)],
                        analytic: analytic.matrix()[(i, j)],
                        se: mc.std_error[(i, j)],
                    };
                    let key = if row.pass() { row.z() } else { f64::INFINITY };
                    if key > worst_key {
                        worst_key = key;
                        worst = row;
                    }
                }
            }
            checks.push(worst);
        }
    }

    // LRW conditional moment identity at a fixed gradient: E[S] = −δ∇̂U and
    // the squared coordinate increment is the constant 2δ.
    {
        let grad: Vec<f64> = (0..d)
            .map(|i| 0.9 - 0.6 * i as f64 / d.max(1) as f64)
            .collect();
        let lattice = (2.0 * step).sqrt();
        let mut sums = vec![0.0; d];
        let mut all_on_lattice = true;
        for _ in 0..n {
            for (i, s) in sums.iter_mut().enumerate() {
                let (p_plus, _) = crate::samplers::lrw_transition_prob(grad[i], step);
                let u: f64 = rng.random();
                let inc = if u < p_plus { lattice } else { -lattice };
                *s += inc;
                all_on_lattice &= inc * inc == lattice * lattice;
            }
        }
        for (i, s) in sums.iter().enumerate() {
            let mean = s / n as f64;
            let var = (2.0 * step - (step * grad[i]).powi(2)).max(0.0);
            checks.push(CheckRow {
                check: "lrw_first_moment",
                scheme: "sglrw",
                index_case: format!("coord_{i}"),
                estimate: mean,
                analytic: -step * grad[i],
                se: (var / n as f64).sqrt(),
            });
        }
        checks.push(CheckRow {
            check: "lrw_second_moment_diag",
            scheme: "sglrw",
            index_case: "all".into(),
            estimate: if all_on_lattice { lattice * lattice } else { f64::NAN },
            analytic: lattice * lattice,
            se: 0.0,
        });
    }

    // Third-moment tensors with Gaussian ζ, G = 0.25·I.
    {
        let grad: Vec<f64> = (0..d)
            .map(|i| 1.2 - 0.7 * (i as f64) * 0.5)
            .collect();
        let theta = vec![0.0; d];
        let noise = SyntheticNoiseModel::isotropic_gaussian(d, 0.5);
        let g_cov = noise.covariance();
        let last = d - 1;
        let mid = 1.min(last);
        let cases: Vec<((usize, usize, usize), &'static str)> = vec![
            ((0, 0, 0), "iii"),
            ((0, 0, last), "iik"),
            ((0, mid, last), "ijk"),
        ];
        for kind in [SamplerKind::Sgld, SamplerKind::Sglrw] {
            for (indices, label) in &cases {
                if indices.0 == indices.2 && *label != "iii" {
                    continue; // d < 3 cannot form this case
                }
                let (est, se) = third_moment_monte_carlo(
                    kind, &theta, &grad, &noise, step, *indices, n, &mut rng,
                )?;
                let analytic = third_moment_analytic(
                    kind,
                    &grad,
                    &ZetaThirdMoments::Zero,
                    &g_cov,
                    step,
                    *indices,
                )?;
                checks.push(CheckRow {
                    check: "third_moment",
                    scheme: kind.name(),
                    index_case: (*label).into(),
                    estimate: est,
                    analytic,
                    se,
                });
            }
        }
    }

    let failed = checks.iter().filter(|c| !c.pass()).count();
    let rows = checks.iter().map(|c| c.render("moment_check")).collect();
    Ok(Report {
        experiment: cfg.experiment,
        header: MOMENT_HEADER,
        rows,
        failed_checks: failed,
    })
}

fn run_clip_constant(cfg: &ExperimentConfig) -> HarnessResult<Report> {
    let mut rng = derive_substream(
        mix_seed(cfg.seeds[0], MOMENT_LABEL),
        1,
        StreamLane::Chain,
    );
    let est = clipped_increment_covariance_constant(cfg.mc_samples, &mut rng)?;
    let abs_error = (est.estimate - est.closed_form).abs();
    let pass = abs_error <= 0.002;
    let rows = vec![format!(
        "clip_constant,{},{},{},{},{},{}",
        cfg.mc_samples,
        fmt(est.estimate),
        fmt(est.std_error),
        fmt(est.closed_form),
        fmt(abs_error),
        pass
    )];
    Ok(Report {
        experiment: cfg.experiment,
        header: CLIP_HEADER,
        rows,
        failed_checks: usize::from(!pass),
    })
}
