use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use leo_reciprocity::harness::{
    bounds::DEFAULT_STRIDE, msl_sweep, noise_identity_check, run_pass, sigma2_from_snr_db, verify_bounds,
    write_csv, write_csv_file, ExperimentConfig,
};
use leo_reciprocity::{Error, Result};
use serde::Serialize;

/// Pseudo-reciprocity tracking and precoding experiments for FDD LEO links.
#[derive(Debug, Parser)]
#[command(name = "leo-recip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a full pass and write per-sample phases and SINRs.
    SimulatePass(Common),
    /// Estimate the mean first-slip time over an SNR grid.
    MslSweep(Common),
    /// Compare scanned per-sample phase increments with the closed-form bounds.
    VerifyBounds(Common),
    /// Check the estimation-noise variance identities.
    NoiseCheck(Common),
}

#[derive(Debug, Args)]
struct Common {
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count (sweeps) or the number of draws (noise check).
    #[arg(long)]
    trials: Option<usize>,
    /// Output CSV path; defaults to the config's, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, Option<PathBuf>)> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let (Some(t), Some(sweep)) = (self.trials, cfg.sweep.as_mut()) {
            sweep.trials = t;
        }
        cfg.validate()?;
        let out = self.out.clone().or_else(|| cfg.output.path.clone());
        Ok((cfg, out))
    }
}

fn emit<T: Serialize>(out: Option<&Path>, rows: &[T]) -> Result<()> {
    match out {
        Some(p) => write_csv_file(p, rows),
        None => write_csv(std::io::stdout().lock(), rows),
    }
}

fn run(cli: Cli) -> Result<()> {
    let (Command::SimulatePass(c) | Command::MslSweep(c) | Command::VerifyBounds(c) | Command::NoiseCheck(c)) =
        &cli.command;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let (cfg, out) = c.load()?;
    match &cli.command {
        Command::SimulatePass(_) => {
            let run = run_pass(&cfg)?;
            let s = &run.summary;
            log::info!(
                "{} samples, gain {:.6e}, max |Δ^D| {:.6}, max |Δ̆^D| {:.3e}, {} ill-conditioned",
                s.samples,
                s.gain,
                s.max_abs_delta_d,
                s.max_abs_delta_d_diff,
                s.ill_conditioned
            );
            emit(out.as_deref(), &run.rows)
        }
        Command::MslSweep(_) => emit(out.as_deref(), &msl_sweep(&cfg)?.points),
        Command::VerifyBounds(_) => emit(out.as_deref(), &verify_bounds(&cfg, DEFAULT_STRIDE)?),
        Command::NoiseCheck(_) => {
            let sigmas: Vec<f64> = match (&cfg.sweep, cfg.link.sigma2) {
                (Some(s), _) => s.snr_db.iter().map(|&d| sigma2_from_snr_db(d)).collect(),
                (None, Some(s)) => vec![s],
                (None, None) => vec![0.1, 1.0],
            };
            let draws = c.trials.unwrap_or(100_000);
            let mut rows = Vec::new();
            for (i, s2) in sigmas.into_iter().enumerate() {
                let seed = leo_reciprocity::rng::mix(cfg.seed, i as u64);
                rows.extend(noise_identity_check(s2, draws, cfg.link.bandwidth_hz, seed)?);
            }
            emit(out.as_deref(), &rows)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
