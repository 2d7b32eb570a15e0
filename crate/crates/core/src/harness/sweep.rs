//! Monte-Carlo mean-first-slip sweeps against the closed-form prediction.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{differential_variance, msl_samples, optimal_gain, LoopParams};
use crate::channel::{noisy_entry, NoiseBank};
use crate::error::{Error, Result};
use crate::harness::config::{DopplerMode, ExperimentConfig, GainPolicy, TrackerKind};
use crate::harness::link_budget::sigma2_from_snr_db;
use crate::rng::mix;
use crate::tracking::{DifferentialTracker, Dpll, SlipMonitor};

/// Upper limit on a default horizon, samples.
pub const MAX_DEFAULT_HORIZON: u64 = 50_000_000;

/// Fraction of censored trials above which a sweep mean is only a lower bound.
pub const CENSORING_WARN_FRACTION: f64 = 0.2;

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlipRecord {
    pub trial: u64,
    pub snr_db: f64,
    /// First sample with `|φ| ≥ π`, or the horizon if censored.
    pub first_slip_sample: u64,
    pub censored: bool,
    pub seed: u64,
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub trials: usize,
    pub censored: usize,
    pub mean_first_slip: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub predicted_msl: f64,
}

impl SweepPoint {
    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.trials as f64
    }

    /// Set when the mean is only a lower bound.
    pub fn heavily_censored(&self) -> bool {
        self.censored_fraction() > CENSORING_WARN_FRACTION
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub records: Vec<SlipRecord>,
}

/// Loop settings of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSetup {
    pub differential: bool,
    pub gain: f64,
    pub period: f64,
    /// Per-estimate noise variance `σ²`.
    pub sigma2: f64,
    /// Input phase increment per sample, rad.
    pub ramp_per_sample: f64,
    pub horizon: u64,
}

impl TrialSetup {
    /// Variance seen by the detector.
    pub fn detector_variance(&self) -> f64 {
        if self.differential {
            differential_variance(self.sigma2)
        } else {
            self.sigma2
        }
    }

    pub fn predicted_msl(&self) -> f64 {
        msl_samples(&LoopParams {
            gain: self.gain,
            period: self.period,
            amplitude: 1.0,
            sigma2: self.detector_variance(),
            doppler: 0.0,
        })
        .mean_samples
    }
}

/// Runs one trial until the first slip or the horizon. Returns the slip
/// sample, if any.
pub fn run_trial(setup: &TrialSetup, seed: u64, trial: u64) -> Option<u64> {
    let mut noise = NoiseBank::new(seed, trial, 2, 1);
    let mut monitor = SlipMonitor::new(0.0, 0.0);
    if setup.differential {
        let mut tracker = DifferentialTracker::new(1, 0.0, 1.0.into(), 1.0.into(), unit_loop(setup));
        for n in 0..setup.horizon {
            let theta = setup.ramp_per_sample * n as f64;
            let obs_ref = noisy_entry(0.0, noise.draw(0, 0, setup.sigma2));
            let obs = noisy_entry(theta, noise.draw(1, 0, setup.sigma2));
            let s = tracker.step(obs, obs_ref);
            monitor.observe(n, theta, s.down_estimate, s.up_estimate);
            if let Some(k) = monitor.first_slip() {
                return Some(k);
            }
        }
    } else {
        let mut dpll = Dpll::new(0.0, 0.0, setup.gain, setup.period, 1.0);
        for n in 0..setup.horizon {
            let theta = setup.ramp_per_sample * n as f64;
            let s = dpll.step(noisy_entry(theta, noise.draw(0, 0, setup.sigma2)));
            monitor.observe(n, theta, s.down_estimate, s.up_estimate);
            if let Some(k) = monitor.first_slip() {
                return Some(k);
            }
        }
    }
    None
}

fn unit_loop(setup: &TrialSetup) -> crate::tracking::LoopConfig {
    crate::tracking::LoopConfig {
        gain: setup.gain,
        period: setup.period,
        ratio: 1.0,
    }
}

/// Sample mean with a normal-approximation 95% interval.
pub fn mean_ci(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, mean, mean);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = 1.96 * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

/// Loop setup for one SNR point of the configured sweep.
pub fn trial_setup(cfg: &ExperimentConfig, snr_db: f64) -> Result<TrialSetup> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::invalid("config has no [sweep] section"))?;
    let differential = match cfg.tracker.kind {
        TrackerKind::Differential => true,
        TrackerKind::Dpll => false,
        TrackerKind::Naive => return Err(Error::invalid("sweeps need a dpll or differential tracker")),
    };
    let period = cfg.tracker.sample_period_s;
    let sigma2 = sigma2_from_snr_db(snr_db);
    let doppler = cfg.doppler_rad_s()?;
    let mut setup = TrialSetup {
        differential,
        gain: 0.0,
        period,
        sigma2,
        ramp_per_sample: match sweep.doppler {
            DopplerMode::Zero => 0.0,
            DopplerMode::Ramp => doppler * period,
        },
        horizon: 0,
    };
    setup.gain = match cfg.tracker.gain_policy {
        GainPolicy::Fixed => cfg.tracker.gain.unwrap_or_default(),
        GainPolicy::Optimal => optimal_gain(1.0, period, setup.detector_variance(), doppler)?.gain,
    };
    setup.horizon = match sweep.horizon {
        Some(h) => h,
        None => (50.0 * setup.predicted_msl()).ceil().clamp(1.0, MAX_DEFAULT_HORIZON as f64) as u64,
    };
    Ok(setup)
}

/// Runs every SNR point of the configured sweep. Trials are independent and
/// seeded from `(seed, point, trial)`, so results do not depend on the
/// number of worker threads.
pub fn msl_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::invalid("config has no [sweep] section"))?;
    let mut result = SweepResult::default();
    for (idx, &snr_db) in sweep.snr_db.iter().enumerate() {
        let setup = trial_setup(cfg, snr_db)?;
        let seed = mix(cfg.seed, idx as u64);
        let records: Vec<SlipRecord> = (0..sweep.trials as u64)
            .into_par_iter()
            .map(|trial| {
                let slip = run_trial(&setup, seed, trial);
                SlipRecord {
                    trial,
                    snr_db,
                    first_slip_sample: slip.unwrap_or(setup.horizon),
                    censored: slip.is_none(),
                    seed,
                }
            })
            .collect();
        let values: Vec<f64> = records.iter().map(|r| r.first_slip_sample as f64).collect();
        let (mean, lo, hi) = mean_ci(&values);
        let point = SweepPoint {
            snr_db,
            trials: records.len(),
            censored: records.iter().filter(|r| r.censored).count(),
            mean_first_slip: mean,
            ci_low: lo,
            ci_high: hi,
            predicted_msl: setup.predicted_msl(),
        };
        if point.heavily_censored() {
            log::warn!(
                "{:.1}% of trials censored at {snr_db} dB; the mean is a lower bound",
                100.0 * point.censored_fraction()
            );
        }
        result.points.push(point);
        result.records.extend(records);
    }
    Ok(result)
}
