//! Checks the closed-form increment bounds against a scanned pass.

use std::f64::consts::PI;

use serde::Serialize;

use crate::analysis::{differential_increment_bound, increment_bound};
use crate::error::Result;
use crate::geometry::TimeWindow;
use crate::harness::config::ExperimentConfig;

/// Increments scanned densely at each end of the window, where the range
/// rate peaks.
pub const EDGE_SAMPLES: u64 = 100_000;

/// Default scan stride through the interior of the window.
pub const DEFAULT_STRIDE: u64 = 10_000;

/// One CSV row: largest per-sample increments of one link over the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub sat: usize,
    pub antenna: usize,
    pub samples: u64,
    pub bound: f64,
    pub max_abs_delta_d: f64,
    pub differential_bound: f64,
    pub max_abs_delta_d_diff: f64,
    pub within: bool,
}

fn scan_indices(n_max: u64, stride: u64) -> impl Iterator<Item = u64> {
    let head = 1..=EDGE_SAMPLES.min(n_max);
    let tail = n_max.saturating_sub(EDGE_SAMPLES).max(1)..=n_max;
    let body = (1..=n_max).step_by(stride.max(1) as usize);
    head.chain(body).chain(tail)
}

/// Scans every link of the configured pass at the tracker sample period.
/// Each satellite's own visible window is used unless the config fixes one.
pub fn verify_bounds(cfg: &ExperimentConfig, stride: u64) -> Result<Vec<BoundRow>> {
    let model = cfg.model()?;
    let params = cfg.link_params()?;
    let period = cfg.tracker.sample_period_s;
    let bound = increment_bound(&model.orbit, params.f_c_down, period);
    let diff_bound = differential_increment_bound(&model.orbit, &model.array, params.f_c_up, period);
    let mut rows = Vec::new();
    for sat in 0..model.num_satellites() {
        let window = match (cfg.orbit.window_start_s, cfg.orbit.window_s) {
            (Some(_), Some(_)) => cfg.window()?,
            _ => {
                let (rise, set) = model.tracks[sat]
                    .visible_window(&model.orbit)
                    .ok_or(crate::Error::NoVisibleSamples)?;
                TimeWindow::new(rise, set - rise)
            }
        };
        let n_max = window.sample_count(period).saturating_sub(1);
        let k = 2.0 * PI * (params.f_c_down + params.freq_offset_down[sat]) / params.c;
        let drift = 2.0 * PI * params.freq_offset_down[sat] * period;
        for m in 0..model.num_antennas() {
            let mut max_d: f64 = 0.0;
            let mut max_dd: f64 = 0.0;
            for n in scan_indices(n_max, stride) {
                let dr = model.range_increment_at(m, sat, window.start_s, period, n);
                max_d = max_d.max((-k * dr + drift).abs());
                let ddr = model.differential_range_increment_at(m, sat, window.start_s, period, n);
                max_dd = max_dd.max((k * ddr).abs());
            }
            rows.push(BoundRow {
                sat,
                antenna: m,
                samples: n_max + 1,
                bound,
                max_abs_delta_d: max_d,
                differential_bound: diff_bound,
                max_abs_delta_d_diff: max_dd,
                within: max_d <= bound,
            });
        }
    }
    Ok(rows)
}
