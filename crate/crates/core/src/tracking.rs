//! Uplink phase trackers driven by downlink observations.
//!
//! All estimators share the carrier-ratio idea: the uplink phase moves by
//! `f_c^U/f_c^D` times whatever the downlink phase moved. [`NaiveTracker`]
//! applies it to wrapped per-sample increments. [`Dpll`] runs a first-order
//! loop with a sinusoidal detector and a second, scaled VCO;
//! [`DifferentialTracker`] runs the same loop on phases referenced to
//! antenna 0.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::analysis::detect_cycle_slip;

const TWO_PI: f64 = 2.0 * PI;

/// `[y]_{2π} = ((y + π) mod 2π) − π`, with the modulo taken into `[0, 2π)`.
pub fn wrap(y: f64) -> f64 {
    (y + PI).rem_euclid(TWO_PI) - PI
}

/// Recursive wrapped-increment estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaiveTracker {
    pub last_down_wrapped: f64,
    pub up_estimate_wrapped: f64,
    pub ratio: f64,
}

impl NaiveTracker {
    /// Seeds the tracker with the fed-back uplink phase and the first
    /// downlink measurement.
    pub fn new(up_feedback: f64, down_phase0: f64, ratio: f64) -> Self {
        Self {
            last_down_wrapped: wrap(down_phase0),
            up_estimate_wrapped: wrap(up_feedback),
            ratio,
        }
    }

    /// Consumes the next measured downlink phase and returns the new wrapped
    /// uplink estimate.
    pub fn step(&mut self, down_phase: f64) -> f64 {
        let now = wrap(down_phase);
        let delta = wrap(now - self.last_down_wrapped);
        self.last_down_wrapped = now;
        self.up_estimate_wrapped = wrap(self.up_estimate_wrapped + self.ratio * delta);
        self.up_estimate_wrapped
    }
}

/// Output of one loop iteration. Estimates are the ones in force when the
/// observation arrived, i.e. before the VCO update it triggers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpllStep {
    pub detector: f64,
    pub down_estimate: f64,
    pub up_estimate: f64,
}

/// First-order DPLL with one downlink VCO and a ratio-scaled uplink VCO.
///
/// Both VCOs integrate the same accumulated correction, so the uplink
/// displacement is exactly `ratio` times the downlink displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dpll {
    pub gain: f64,
    pub period: f64,
    pub ratio: f64,
    down_init: f64,
    up_init: f64,
    displacement: f64,
}

impl Dpll {
    pub fn new(down_init: f64, up_init: f64, gain: f64, period: f64, ratio: f64) -> Self {
        Self {
            gain,
            period,
            ratio,
            down_init,
            up_init,
            displacement: 0.0,
        }
    }

    pub fn vco_down(&self) -> f64 {
        self.down_init + self.displacement
    }

    pub fn vco_up(&self) -> f64 {
        self.up_init + self.up_displacement()
    }

    /// Re-anchors the uplink VCO so that it currently outputs `true_up`,
    /// as when a fresh uplink phase is fed back.
    pub fn anchor_up(&mut self, true_up: f64) {
        self.up_init = true_up - self.up_displacement();
    }

    pub fn down_displacement(&self) -> f64 {
        self.displacement
    }

    pub fn up_displacement(&self) -> f64 {
        self.ratio * self.displacement
    }

    /// Sinusoidal detector `Im(ĥ·e^{−jΘ̂^D})`.
    pub fn detector(&self, observed: Complex64) -> f64 {
        (observed * Complex64::cis(-crate::channel::reduce_phase(self.vco_down()))).im
    }

    pub fn step(&mut self, observed: Complex64) -> DpllStep {
        let out = DpllStep {
            detector: self.detector(observed),
            down_estimate: self.vco_down(),
            up_estimate: self.vco_up(),
        };
        self.displacement += self.gain * self.period * out.detector;
        out
    }
}

/// Loop parameters shared by every tracked link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    pub gain: f64,
    pub period: f64,
    pub ratio: f64,
}

/// Seeds a DPLL: the uplink VCO takes the fed-back phase, the downlink VCO
/// the phase of the first observation.
pub fn init_from_feedback(true_up_phase0: f64, observed_down0: Complex64, cfg: LoopConfig) -> Dpll {
    Dpll::new(observed_down0.arg(), true_up_phase0, cfg.gain, cfg.period, cfg.ratio)
}

/// DPLL on the antenna-0-referenced product `ĥ_0^*·ĥ_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferentialTracker {
    loop_: Option<Dpll>,
}

impl DifferentialTracker {
    /// `m == 0` yields the reference tracker, whose outputs are identically 0.
    pub fn new(m: usize, true_up_diff0: f64, observed_m0: Complex64, observed_ref0: Complex64, cfg: LoopConfig) -> Self {
        let loop_ = (m != 0).then(|| init_from_feedback(true_up_diff0, Self::product(observed_m0, observed_ref0), cfg));
        Self { loop_ }
    }

    /// Detector input, used raw: its noise variance is `σ⁴ + 2σ²`.
    pub fn product(observed_m: Complex64, observed_ref: Complex64) -> Complex64 {
        observed_ref.conj() * observed_m
    }

    pub fn is_reference(&self) -> bool {
        self.loop_.is_none()
    }

    pub fn dpll(&self) -> Option<&Dpll> {
        self.loop_.as_ref()
    }

    pub fn anchor_up(&mut self, true_up_diff: f64) {
        if let Some(dpll) = &mut self.loop_ {
            dpll.anchor_up(true_up_diff);
        }
    }

    pub fn step(&mut self, observed_m: Complex64, observed_ref: Complex64) -> DpllStep {
        match &mut self.loop_ {
            Some(dpll) => dpll.step(Self::product(observed_m, observed_ref)),
            None => DpllStep {
                detector: 0.0,
                down_estimate: 0.0,
                up_estimate: 0.0,
            },
        }
    }
}

/// Per-sample tracking error record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub phi_unwrapped: f64,
    pub phi_wrapped: f64,
    pub up_phase_estimate: f64,
    pub slipped: bool,
}

/// Follows the unwrapped downlink error `φ = Θ − Θ̂ − 2πk` and latches the
/// first cycle slip. The cycle `k` is fixed at construction so that the
/// initial error lies in `[−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipMonitor {
    branch: f64,
    first_slip: Option<u64>,
}

impl SlipMonitor {
    pub fn new(true_phase0: f64, estimate0: f64) -> Self {
        Self {
            branch: TWO_PI * ((true_phase0 - estimate0) / TWO_PI).round(),
            first_slip: None,
        }
    }

    pub fn error(&self, true_phase: f64, estimate: f64) -> f64 {
        true_phase - estimate - self.branch
    }

    pub fn observe(&mut self, n: u64, true_phase: f64, estimate: f64, up_estimate: f64) -> TrackSample {
        let phi = self.error(true_phase, estimate);
        if self.first_slip.is_none() && detect_cycle_slip(phi) {
            self.first_slip = Some(n);
        }
        TrackSample {
            phi_unwrapped: phi,
            phi_wrapped: wrap(phi),
            up_phase_estimate: up_estimate,
            slipped: self.first_slip.is_some(),
        }
    }

    pub fn slipped(&self) -> bool {
        self.first_slip.is_some()
    }

    pub fn first_slip(&self) -> Option<u64> {
        self.first_slip
    }
}

/// Unwraps a sequence of wrapped phases by removing jumps larger than π.
pub fn unwrap_phases(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut offset = 0.0;
    for (i, &p) in wrapped.iter().enumerate() {
        if i > 0 {
            let step = p - wrapped[i - 1];
            offset -= TWO_PI * (step / TWO_PI).round();
        }
        out.push(p + offset);
    }
    out
}
