//! CLI entry point: `latticewalk <config-path> [--out PATH] [--seed N] [--timings]`.
//!
//! Flags override config fields. CSV goes to --out, the config's `out` path,
//! or stdout; progress and divergence warnings go to stderr. Exit codes:
//! 0 success, 1 config error, 2 runtime error.

use latticewalk::harness::{parse_config, run_experiment, HarnessError};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

struct Args {
    config: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    timings: bool,
}

fn usage() -> &'static str {
    "usage: latticewalk <config-path> [--out PATH] [--seed N] [--timings]"
}

fn parse_args() -> Result<Args, String> {
    let mut config = None;
    let mut out = None;
    let mut seed = None;
    let mut timings = false;
    let mut iter = std::env::args().skip(1);
    while let Some(arg) = iter.next() {
        match arg.as_str() {
            "--out" => {
                let v = iter.next().ok_or("--out requires a path")?;
                out = Some(PathBuf::from(v));
            }
            "--seed" => {
                let v = iter.next().ok_or("--seed requires an integer")?;
                seed = Some(v.parse::<u64>().map_err(|_| "--seed requires an integer")?);
            }
            "--timings" => timings = true,
            "--help" | "-h" => return Err(usage().to_string()),
            other if other.starts_with("--") => {
                return Err(format!("unknown flag '{other}'\n{}", usage()));
            }
            other => {
                if config.replace(PathBuf::from(other)).is_some() {
                    return Err(format!("unexpected extra argument '{other}'\n{}", usage()));
                }
            }
        }
    }
    let config = config.ok_or_else(|| usage().to_string())?;
    Ok(Args {
        config,
        out,
        seed,
        timings,
    })
}

fn run(args: Args) -> Result<(), HarnessError> {
    let mut cfg = parse_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = args.out {
        cfg.out = Some(out);
    }
    let started = std::time::Instant::now();
    let report = run_experiment(&cfg, args.timings)?;
    let csv = report.to_csv();
    match &cfg.out {
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            file.write_all(csv.as_bytes())?;
        }
        None => {
            std::io::stdout().write_all(csv.as_bytes())?;
        }
    }
    eprintln!(
        "[{}] {} rows in {:.1}s{}",
        cfg.experiment.name(),
        report.rows.len(),
        started.elapsed().as_secs_f64(),
        if report.failed_checks > 0 {
            format!("; {} check(s) FAILED", report.failed_checks)
        } else {
            String::new()
        }
    );
    Ok(())
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(1);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
