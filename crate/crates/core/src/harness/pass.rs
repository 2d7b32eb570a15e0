//! Full-pass simulation of phase tracking and of uplink precoding with full
//! or tracked CSIT.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use rayon::prelude::*;

use crate::analysis::{differential_variance, optimal_gain};
use crate::channel::{
    noisy_entry, phase_diff, phase_down, phase_up, ChannelSnapshot, LinkDirection, LinkParams, NoiseBank,
};
use crate::geometry::{PassModel, TimeWindow};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, GainPolicy, TrackerKind};
use crate::precoding::{mrc_snr_db, post_precoding_sinr, zf_precoder_with_limit};
use crate::tracking::{init_from_feedback, wrap, DifferentialTracker, Dpll, LoopConfig, NaiveTracker, SlipMonitor};

/// One CSV row of a pass: link `(antenna, sat)` at time `t_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassRow {
    pub t_s: f64,
    pub sat: usize,
    pub antenna: usize,
    pub theta_d_true: f64,
    pub theta_d_est: f64,
    pub theta_u_true: f64,
    pub theta_u_est: f64,
    pub phi: f64,
    pub phi_wrapped: f64,
    pub delta_d: f64,
    pub delta_d_diff: f64,
    pub sinr_full_db: f64,
    pub sinr_tracked_db: f64,
    pub sinr_mrc_db: f64,
    pub cond: f64,
}

/// Per-satellite precoding outcome at one evaluated sample. SINRs are NaN
/// when the channel was too ill-conditioned for ZF.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrSample {
    pub t_s: f64,
    pub cond: f64,
    pub full_db: Vec<f64>,
    pub tracked_db: Vec<f64>,
    pub mrc_db: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PassSummary {
    pub samples: u64,
    pub gain: f64,
    pub ill_conditioned: u64,
    /// First slip sample per link `m·L + ℓ` (DPLL-based trackers).
    pub first_slip: Vec<Option<u64>>,
    pub max_abs_delta_d: f64,
    pub max_abs_delta_d_diff: f64,
    /// Samples at which a true downlink increment reached π, breaking the
    /// naive recursion. Recorded, not repaired.
    pub increment_violations: u64,
}

#[derive(Debug, Clone, Default)]
pub struct PassRun {
    pub rows: Vec<PassRow>,
    pub sinr: Vec<SinrSample>,
    pub summary: PassSummary,
}

/// Forced downlink cycle slip: the observed phase of one link is rotated by
/// a full turn, slowly enough for the loop to follow. The observation at the
/// end is unchanged, so the loop is left one cycle away from the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipInjection {
    pub start: u64,
    pub ramp: u64,
    pub antenna: usize,
    pub sat: usize,
}

impl SlipInjection {
    /// Ramp length giving a tracking lag of about `π/8` for loop factor `kt`.
    pub fn for_loop(start: u64, kt: f64, antenna: usize, sat: usize) -> Self {
        let ramp = (16.0 / kt.max(1e-12)).ceil() as u64;
        Self {
            start,
            ramp: ramp.max(1),
            antenna,
            sat,
        }
    }

    pub fn offset(&self, n: u64, antenna: usize, sat: usize) -> f64 {
        if antenna != self.antenna || sat != self.sat || n < self.start {
            return 0.0;
        }
        let frac = ((n - self.start) as f64 / self.ramp as f64).min(1.0);
        2.0 * PI * frac
    }
}

enum LinkTracker {
    Naive(NaiveTracker),
    Dpll(Dpll, SlipMonitor),
    Differential(DifferentialTracker, Option<SlipMonitor>),
}

impl LinkTracker {
    fn anchor_up(&mut self, true_up: f64, true_up_diff: f64) {
        match self {
            LinkTracker::Dpll(d, _) => d.anchor_up(true_up),
            LinkTracker::Differential(d, _) => d.anchor_up(true_up_diff),
            LinkTracker::Naive(_) => {}
        }
    }

    fn first_slip(&self) -> Option<u64> {
        match self {
            LinkTracker::Dpll(_, mon) | LinkTracker::Differential(_, Some(mon)) => mon.first_slip(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct LinkOutput {
    down_est: f64,
    up_est: f64,
    phi: f64,
    delta_d: f64,
    delta_d_diff: f64,
}

/// Tracking history of the `M` links of one satellite.
struct SatelliteTrace {
    /// `M` outputs per recorded sample.
    outputs: Vec<LinkOutput>,
    first_slip: Vec<Option<u64>>,
    max_abs_delta_d: f64,
    max_abs_delta_d_diff: f64,
    increment_violations: u64,
}

struct PassContext<'a> {
    cfg: &'a ExperimentConfig,
    model: PassModel,
    params: LinkParams,
    window: TimeWindow,
    loop_cfg: LoopConfig,
    injection: Option<SlipInjection>,
    feedback_at: Option<u64>,
    n_samples: u64,
}

impl PassContext<'_> {
    fn sigma2_at(&self, range: f64) -> f64 {
        match self.cfg.link.sigma2 {
            Some(s) => s,
            None => self.cfg.budget().link_budget_sigma(range, self.params.f_c_down),
        }
    }

    fn new_tracker(&self, m: usize, l: usize, obs: Complex64, obs_ref: Complex64, range: f64, diff: f64) -> LinkTracker {
        let params = &self.params;
        match self.cfg.tracker.kind {
            TrackerKind::Naive => LinkTracker::Naive(NaiveTracker::new(phase_up(params, range), obs.arg(), params.ratio())),
            TrackerKind::Dpll => {
                let d = init_from_feedback(phase_up(params, range), obs, self.loop_cfg);
                let mon = SlipMonitor::new(phase_down(params, l, range, 0.0), d.vco_down());
                LinkTracker::Dpll(d, mon)
            }
            TrackerKind::Differential => {
                let up_diff0 = phase_diff(params, LinkDirection::Up, l, diff);
                let d = DifferentialTracker::new(m, up_diff0, obs, obs_ref, self.loop_cfg);
                let true_diff = phase_diff(params, LinkDirection::Down, l, diff);
                let mon = d.dpll().map(|p| SlipMonitor::new(true_diff, p.vco_down()));
                LinkTracker::Differential(d, mon)
            }
        }
    }

    fn track_satellite(&self, l: usize) -> SatelliteTrace {
        let (params, period) = (&self.params, self.loop_cfg.period);
        let m_count = self.model.num_antennas();
        let record_every = self.cfg.output.record_every;
        let mut noise = NoiseBank::new(self.cfg.seed, 0, m_count, self.model.num_satellites());
        let mut ranges = vec![0.0; m_count];
        let mut diffs = vec![0.0; m_count];
        let mut theta = vec![0.0; m_count];
        let mut theta_diff = vec![0.0; m_count];
        let mut prev = vec![0.0; m_count];
        let mut prev_diff = vec![0.0; m_count];
        let mut observed = vec![Complex64::default(); m_count];
        let mut trackers: Vec<LinkTracker> = Vec::with_capacity(m_count);
        let mut trace = SatelliteTrace {
            outputs: Vec::with_capacity(m_count * (self.n_samples / record_every + 1) as usize),
            first_slip: Vec::new(),
            max_abs_delta_d: 0.0,
            max_abs_delta_d_diff: 0.0,
            increment_violations: 0,
        };

        for n in 0..self.n_samples {
            let t_rel = n as f64 * period;
            self.model
                .satellite_ranges_into(l, self.window.start_s + t_rel, &mut ranges, &mut diffs);
            let s2 = self.sigma2_at(ranges[0]);
            for m in 0..m_count {
                theta[m] = phase_down(params, l, ranges[m], t_rel);
                theta_diff[m] = phase_diff(params, LinkDirection::Down, l, diffs[m]);
                let extra = self.injection.map_or(0.0, |inj| inj.offset(n, m, l));
                observed[m] = noisy_entry(theta[m] + extra, noise.draw(m, l, s2));
            }
            if n == 0 {
                for m in 0..m_count {
                    trackers.push(self.new_tracker(m, l, observed[m], observed[0], ranges[m], diffs[m]));
                }
            }
            if self.feedback_at == Some(n) {
                for (m, tr) in trackers.iter_mut().enumerate() {
                    tr.anchor_up(phase_up(params, ranges[m]), phase_diff(params, LinkDirection::Up, l, diffs[m]));
                }
            }

            let record = n % record_every == 0;
            for m in 0..m_count {
                let mut out = match &mut trackers[m] {
                    LinkTracker::Naive(tr) => {
                        let measured = wrap(observed[m].arg());
                        let up = if n == 0 { tr.up_estimate_wrapped } else { tr.step(measured) };
                        LinkOutput {
                            down_est: measured,
                            up_est: up,
                            phi: wrap(theta[m] - measured),
                            ..LinkOutput::default()
                        }
                    }
                    LinkTracker::Dpll(d, mon) => {
                        let s = d.step(observed[m]);
                        LinkOutput {
                            down_est: s.down_estimate,
                            up_est: s.up_estimate,
                            phi: mon.observe(n, theta[m], s.down_estimate, s.up_estimate).phi_unwrapped,
                            ..LinkOutput::default()
                        }
                    }
                    LinkTracker::Differential(d, mon) => {
                        let s = d.step(observed[m], observed[0]);
                        let phi = mon.as_mut().map_or(0.0, |mon| {
                            mon.observe(n, theta_diff[m], s.down_estimate, s.up_estimate).phi_unwrapped
                        });
                        LinkOutput {
                            down_est: s.down_estimate,
                            up_est: s.up_estimate,
                            phi,
                            ..LinkOutput::default()
                        }
                    }
                };
                if n > 0 {
                    out.delta_d = theta[m] - prev[m];
                    out.delta_d_diff = theta_diff[m] - prev_diff[m];
                    trace.max_abs_delta_d = trace.max_abs_delta_d.max(out.delta_d.abs());
                    trace.max_abs_delta_d_diff = trace.max_abs_delta_d_diff.max(out.delta_d_diff.abs());
                    if out.delta_d.abs() >= PI {
                        trace.increment_violations += 1;
                    }
                }
                prev[m] = theta[m];
                prev_diff[m] = theta_diff[m];
                if record {
                    trace.outputs.push(out);
                }
            }
        }
        trace.first_slip = trackers.iter().map(LinkTracker::first_slip).collect();
        trace
    }
}

/// Simulates the configured pass. Satellites are tracked in parallel; each
/// link has its own noise stream, so the output does not depend on the
/// number of worker threads.
pub fn run_pass(cfg: &ExperimentConfig) -> Result<PassRun> {
    let model = cfg.model()?;
    let params = cfg.link_params()?;
    let power = cfg.budget().power_budget();
    let window = cfg.window()?;
    let period = cfg.tracker.sample_period_s;
    let kind = cfg.tracker.kind;
    let (m_count, l_count) = (model.num_antennas(), model.num_satellites());
    let record_every = cfg.output.record_every;

    let mut ctx = PassContext {
        cfg,
        model,
        params,
        window,
        loop_cfg: LoopConfig {
            gain: 0.0,
            period,
            ratio: 0.0,
        },
        injection: None,
        feedback_at: cfg
            .tracker
            .feedback_delay_s
            .map(|d| (d / period).round() as u64)
            .filter(|&n| n > 0),
        n_samples: window.sample_count(period),
    };
    let gain = match cfg.tracker.gain_policy {
        _ if kind == TrackerKind::Naive => 0.0,
        GainPolicy::Fixed => cfg.tracker.gain.unwrap_or_default(),
        GainPolicy::Optimal => {
            let s2 = ctx.sigma2_at(ctx.model.range(0, 0, window.start_s + 0.5 * window.duration_s));
            let s2 = if kind == TrackerKind::Differential { differential_variance(s2) } else { s2 };
            optimal_gain(1.0, period, s2, cfg.doppler_rad_s()?)?.gain
        }
    };
    ctx.loop_cfg = LoopConfig {
        gain,
        period,
        ratio: ctx.params.ratio(),
    };
    ctx.injection = cfg.tracker.inject_slip_at_s.map(|t| {
        let start = ((t - window.start_s) / period).round().max(1.0) as u64;
        SlipInjection::for_loop(start, gain * period, m_count - 1, 0)
    });

    let traces: Vec<SatelliteTrace> = (0..l_count).into_par_iter().map(|l| ctx.track_satellite(l)).collect();

    let mut run = PassRun::default();
    run.summary.samples = ctx.n_samples;
    run.summary.gain = gain;
    run.summary.first_slip = (0..m_count)
        .flat_map(|m| traces.iter().map(move |tr| tr.first_slip[m]))
        .collect();
    for tr in &traces {
        run.summary.max_abs_delta_d = run.summary.max_abs_delta_d.max(tr.max_abs_delta_d);
        run.summary.max_abs_delta_d_diff = run.summary.max_abs_delta_d_diff.max(tr.max_abs_delta_d_diff);
        run.summary.increment_violations += tr.increment_violations;
    }

    let mut ranges = DMatrix::<f64>::zeros(m_count, l_count);
    let mut diffs = DMatrix::<f64>::zeros(m_count, l_count);
    let n_records = traces[0].outputs.len() / m_count;
    for k in 0..n_records {
        let n = k as u64 * record_every;
        let t_rel = n as f64 * period;
        let t = window.start_s + t_rel;
        ctx.model.ranges_into(t, &mut ranges, &mut diffs);
        let snapshot = ChannelSnapshot::from_ranges_and_differences(&ctx.params, &ranges, &diffs, t_rel);
        let output = |m: usize, l: usize| &traces[l].outputs[k * m_count + m];
        let (true_down, true_up) = match kind {
            TrackerKind::Differential => (&snapshot.theta_down_diff, &snapshot.theta_up_diff),
            _ => (&snapshot.theta_down, &snapshot.theta_up),
        };
        let tracked_up = DMatrix::from_fn(m_count, l_count, |m, l| Complex64::cis(output(m, l).up_est));
        let full = zf_precoder_with_limit(&snapshot.h_up(), cfg.tracker.cond_limit);
        let tracked = zf_precoder_with_limit(&tracked_up, cfg.tracker.cond_limit);
        let cond = match &full {
            Ok(p) => p.condition_number,
            Err(Error::SingularChannel { cond }) => *cond,
            Err(_) => f64::NAN,
        };
        let (full_db, tracked_db) = match (&full, &tracked) {
            (Ok(f), Ok(tr)) => (
                post_precoding_sinr(f, &snapshot, &power).sinr_db,
                post_precoding_sinr(tr, &snapshot, &power).sinr_db,
            ),
            _ => {
                run.summary.ill_conditioned += 1;
                (vec![f64::NAN; l_count], vec![f64::NAN; l_count])
            }
        };
        let h_up = snapshot.h_up();
        let mrc_db = (0..l_count)
            .map(|l| mrc_snr_db(&h_up.column(l).into_owned(), &snapshot, l, 0.5, &power))
            .collect::<Result<Vec<f64>>>()?;

        for l in 0..l_count {
            for m in 0..m_count {
                let o = output(m, l);
                run.rows.push(PassRow {
                    t_s: t,
                    sat: l,
                    antenna: m,
                    theta_d_true: true_down[(m, l)],
                    theta_d_est: o.down_est,
                    theta_u_true: true_up[(m, l)],
                    theta_u_est: o.up_est,
                    phi: o.phi,
                    phi_wrapped: wrap(o.phi),
                    delta_d: o.delta_d,
                    delta_d_diff: o.delta_d_diff,
                    sinr_full_db: full_db[l],
                    sinr_tracked_db: tracked_db[l],
                    sinr_mrc_db: mrc_db[l],
                    cond,
                });
            }
        }
        run.sinr.push(SinrSample {
            t_s: t,
            cond,
            full_db,
            tracked_db,
            mrc_db,
        });
    }
    Ok(run)
}
