//! Flat `key = value` experiment configuration.
//!
//! Lists are comma-separated, `#` starts a comment, unknown keys are errors.
//! Defaults depend on the experiment, so the `experiment` key is mandatory.

use crate::samplers::{Retain, SamplerKind};
use crate::schedule::ScheduleMode;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read config {path}: {source}")]
    MissingFile {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Numeric(#[from] crate::Error),
}

impl HarnessError {
    /// 1 for configuration problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::MissingFile { .. } | HarnessError::Config { .. } => 1,
            _ => 2,
        }
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Linreg,
    Logreg,
    Heavy1d,
    MseSweep,
    MomentCheck,
    ClipConstant,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Linreg => "linreg",
            ExperimentKind::Logreg => "logreg",
            ExperimentKind::Heavy1d => "heavy1d",
            ExperimentKind::MseSweep => "mse_sweep",
            ExperimentKind::MomentCheck => "moment_check",
            ExperimentKind::ClipConstant => "clip_constant",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "linreg" => ExperimentKind::Linreg,
            "logreg" => ExperimentKind::Logreg,
            "heavy1d" => ExperimentKind::Heavy1d,
            "mse_sweep" => ExperimentKind::MseSweep,
            "moment_check" => ExperimentKind::MomentCheck,
            "clip_constant" => ExperimentKind::ClipConstant,
            _ => return None,
        })
    }
}

/// Fully resolved experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub samplers: Vec<SamplerKind>,
    pub batch_sizes: Vec<usize>,
    pub base_steps: Vec<f64>,
    pub schedule_mode: ScheduleMode,
    pub decay_exponent: f64,
    pub dimension: usize,
    pub data_size: usize,
    pub noise_variance: f64,
    pub prior_precision: f64,
    pub separation: f64,
    pub n_chains: usize,
    pub n_iters: u64,
    pub burn_in: u64,
    pub retain: Retain,
    pub seeds: Vec<u64>,
    pub alpha: f64,
    pub noise_scales: Vec<f64>,
    pub mc_samples: u64,
    pub mc_pairs: usize,
    pub hist_bins: usize,
    pub hist_min: f64,
    pub hist_max: f64,
    pub reference_step: f64,
    pub reference_length: u64,
    pub reference_thin: u64,
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Documented defaults for each experiment.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut cfg = ExperimentConfig {
            experiment: kind,
            samplers: vec![
                SamplerKind::Sgld,
                SamplerKind::Sglrw,
                SamplerKind::ClippedSgld,
            ],
            batch_sizes: vec![32],
            base_steps: vec![1e-3],
            schedule_mode: ScheduleMode::Decaying,
            decay_exponent: 0.55,
            dimension: 10,
            data_size: 500,
            noise_variance: 1.5,
            prior_precision: 0.01,
            separation: 2.0,
            n_chains: 100,
            n_iters: 1000,
            burn_in: 0,
            retain: Retain::FinalOnly,
            seeds: vec![1],
            alpha: 1.5,
            noise_scales: vec![1.0],
            mc_samples: 1_000_000,
            mc_pairs: 5,
            hist_bins: 80,
            hist_min: -8.0,
            hist_max: 8.0,
            reference_step: 1e-3,
            reference_length: 200_000,
            reference_thin: 10,
            dataset: None,
            out: None,
        };
        match kind {
            ExperimentKind::Linreg => {
                cfg.noise_variance = 0.05;
                cfg.prior_precision = 1.0;
                cfg.n_chains = 500;
                cfg.n_iters = 5000;
                cfg.batch_sizes = vec![8, 16, 32, 64, 512];
                cfg.base_steps = vec![1e-3, 1e-4];
            }
            ExperimentKind::MseSweep => {
                cfg.schedule_mode = ScheduleMode::Fixed;
                cfg.n_chains = 32;
                cfg.n_iters = 1500;
                cfg.batch_sizes = vec![8, 32, 128];
                cfg.base_steps = vec![2.4e-3, 3.3e-3, 4.4e-3, 6e-3];
                cfg.seeds = (1..=8).collect();
            }
            ExperimentKind::Logreg => {
                cfg.dimension = 5;
                cfg.data_size = 200;
                cfg.prior_precision = 1.0;
                cfg.n_chains = 500;
                cfg.n_iters = 1000;
                cfg.batch_sizes = vec![1, 4, 16, 64];
                cfg.base_steps = vec![1e-2, 1e-3];
            }
            ExperimentKind::Heavy1d => {
                cfg.schedule_mode = ScheduleMode::Fixed;
                cfg.base_steps = vec![5e-3];
                cfg.n_chains = 8;
                cfg.n_iters = 15_500;
                cfg.burn_in = 3_000;
                cfg.retain = Retain::AllPostBurnin;
                cfg.noise_scales = vec![1.0, 4.0, 32.0];
            }
            ExperimentKind::MomentCheck => {
                cfg.dimension = 3;
                cfg.base_steps = vec![1e-2];
            }
            ExperimentKind::ClipConstant => {}
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.samplers.is_empty()
            || self.batch_sizes.is_empty()
            || self.base_steps.is_empty()
            || self.seeds.is_empty()
            || self.noise_scales.is_empty()
        {
            return Err("list-valued fields must be non-empty".into());
        }
        if self.batch_sizes.iter().any(|b| *b == 0) {
            return Err("batch sizes must be positive".into());
        }
        if self.base_steps.iter().any(|s| !(*s > 0.0)) {
            return Err("base steps must be positive".into());
        }
        if self.dimension == 0 || self.data_size == 0 || self.n_chains == 0 || self.n_iters == 0 {
            return Err("dimension, data_size, n_chains, n_iters must be positive".into());
        }
        if self.burn_in >= self.n_iters {
            return Err(format!(
                "burn_in {} must be < n_iters {}",
                self.burn_in, self.n_iters
            ));
        }
        if !(self.noise_variance > 0.0) || !(self.prior_precision > 0.0) {
            return Err("noise_variance and prior_precision must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(format!("alpha must lie in (0, 2], got {}", self.alpha));
        }
        if self.noise_scales.iter().any(|s| !(*s > 0.0)) {
            return Err("noise scales must be positive".into());
        }
        if self.hist_bins < 2 || !(self.hist_min < self.hist_max) {
            return Err("histogram needs ≥ 2 bins and hist_min < hist_max".into());
        }
        if self.mc_samples == 0 || self.mc_pairs == 0 {
            return Err("mc_samples and mc_pairs must be positive".into());
        }
        Ok(())
    }
}

/// Parses a config file; strict about unknown keys, reports line numbers.
pub fn parse_config(path: &Path) -> HarnessResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, path)
}

pub fn parse_config_str(text: &str, path: &Path) -> HarnessResult<ExperimentConfig> {
    let err = |line: usize, message: String| HarnessError::Config {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(err(line_no, "empty key or value".into()));
        }
        entries.push((line_no, key, value));
    }

    let (exp_line, exp_value) = entries
        .iter()
        .find(|(_, k, _)| k == "experiment")
        .map(|(l, _, v)| (*l, v.clone()))
        .ok_or_else(|| err(1, "missing required key 'experiment'".into()))?;
    let kind = ExperimentKind::parse(&exp_value).ok_or_else(|| {
        err(
            exp_line,
            format!(
                "unknown experiment '{exp_value}' (expected linreg, logreg, heavy1d, mse_sweep, moment_check, clip_constant)"
            ),
        )
    })?;
    let mut cfg = ExperimentConfig::defaults(kind);

    for (line, key, value) in &entries {
        let line = *line;
        let bad = |what: &str| err(line, format!("invalid {what} '{value}'"));
        match key.as_str() {
            "experiment" => {}
            "samplers" => {
                cfg.samplers = split_list(value)
                    .map(|s| {
                        SamplerKind::parse(s)
                            .ok_or_else(|| err(line, format!("unknown sampler '{s}'")))
                    })
                    .collect::<HarnessResult<_>>()?;
            }
            "batch_sizes" => cfg.batch_sizes = parse_list(value).map_err(|_| bad("batch size"))?,
            "base_steps" => cfg.base_steps = parse_list(value).map_err(|_| bad("step"))?,
            "schedule" => {
                cfg.schedule_mode = match value.as_str() {
                    "decaying" => ScheduleMode::Decaying,
                    "fixed" => ScheduleMode::Fixed,
                    _ => return Err(err(line, format!("unknown schedule '{value}'"))),
                }
            }
            "decay_exponent" => cfg.decay_exponent = value.parse().map_err(|_| bad("number"))?,
            "dimension" => cfg.dimension = value.parse().map_err(|_| bad("integer"))?,
            "data_size" => cfg.data_size = value.parse().map_err(|_| bad("integer"))?,
            "noise_variance" => cfg.noise_variance = value.parse().map_err(|_| bad("number"))?,
            "prior_precision" => cfg.prior_precision = value.parse().map_err(|_| bad("number"))?,
            "separation" => cfg.separation = value.parse().map_err(|_| bad("number"))?,
            "n_chains" => cfg.n_chains = value.parse().map_err(|_| bad("integer"))?,
            "n_iters" => cfg.n_iters = value.parse().map_err(|_| bad("integer"))?,
            "burn_in" => cfg.burn_in = value.parse().map_err(|_| bad("integer"))?,
            "retain" => {
                cfg.retain = match value.as_str() {
                    "all_post_burnin" => Retain::AllPostBurnin,
                    "final_only" => Retain::FinalOnly,
                    _ => return Err(err(line, format!("unknown retain mode '{value}'"))),
                }
            }
            "seeds" => cfg.seeds = parse_list(value).map_err(|_| bad("seed"))?,
            "alpha" => cfg.alpha = value.parse().map_err(|_| bad("number"))?,
            "noise_scales" => cfg.noise_scales = parse_list(value).map_err(|_| bad("scale"))?,
            "mc_samples" => cfg.mc_samples = value.parse().map_err(|_| bad("integer"))?,
            "mc_pairs" => cfg.mc_pairs = value.parse().map_err(|_| bad("integer"))?,
            "hist_bins" => cfg.hist_bins = value.parse().map_err(|_| bad("integer"))?,
            "hist_min" => cfg.hist_min = value.parse().map_err(|_| bad("number"))?,
            "hist_max" => cfg.hist_max = value.parse().map_err(|_| bad("number"))?,
            "reference_step" => cfg.reference_step = value.parse().map_err(|_| bad("number"))?,
            "reference_length" => {
                cfg.reference_length = value.parse().map_err(|_| bad("integer"))?
            }
            "reference_thin" => cfg.reference_thin = value.parse().map_err(|_| bad("integer"))?,
            "dataset" => cfg.dataset = Some(PathBuf::from(value)),
            "out" => cfg.out = Some(PathBuf::from(value)),
            _ => return Err(err(line, format!("unknown key '{key}'"))),
        }
    }

    cfg.validate()
        .map_err(|message| err(exp_line, message))?;
    Ok(cfg)
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(|s| s.trim()).filter(|s| !s.is_empty())
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, ()> {
    let items: Result<Vec<T>, _> = split_list(value).map(|s| s.parse::<T>()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(()),
    }
}
