use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analysis::increment_bound;
use crate::channel::LinkParams;
use crate::error::{Error, Result};
use crate::geometry::{ArrayConfig, OrbitConfig, PassDirection, PassModel, SatelliteTrack, TimeWindow};
use crate::harness::link_budget::LinkBudget;
use crate::SPEED_OF_LIGHT;

/// Full scenario description, read from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    pub orbit: OrbitSection,
    pub array: ArraySection,
    pub link: LinkSection,
    pub tracker: TrackerSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSection {
    pub altitude_m: f64,
    #[serde(default = "default_earth_radius")]
    pub earth_radius_m: f64,
    #[serde(default = "default_mu")]
    pub gravitational_parameter: f64,
    #[serde(default = "default_satellites")]
    pub satellites: Vec<SatelliteSection>,
    /// Start of the simulated window, s; defaults to the common rise time.
    #[serde(default)]
    pub window_start_s: Option<f64>,
    /// Length of the simulated window, s; defaults to the common visibility.
    #[serde(default)]
    pub window_s: Option<f64>,
}

fn default_earth_radius() -> f64 {
    OrbitConfig::EARTH_RADIUS_M
}

fn default_mu() -> f64 {
    OrbitConfig::EARTH_MU
}

fn default_satellites() -> Vec<SatelliteSection> {
    vec![SatelliteSection::default()]
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteSection {
    #[serde(default)]
    pub along_track_deg: f64,
    #[serde(default)]
    pub cross_track_deg: f64,
    #[serde(default)]
    pub reverse: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub num_antennas: usize,
    pub spacing_m: f64,
    #[serde(default)]
    pub azimuth_deg: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub f_c_down_hz: f64,
    pub f_c_up_hz: f64,
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
    #[serde(default = "default_tx_gain")]
    pub tx_gain_dbi: f64,
    #[serde(default = "default_rx_gain")]
    pub rx_gain_dbi: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_noise_psd")]
    pub noise_psd_dbm_hz: f64,
    /// Per-satellite downlink frequency offsets, Hz (zero when omitted).
    #[serde(default)]
    pub freq_offset_down_hz: Vec<f64>,
    #[serde(default)]
    pub freq_offset_up_hz: Vec<f64>,
    /// Draw the unknown phase offsets uniformly from `[−π, π]`.
    #[serde(default = "yes")]
    pub random_phase_offsets: bool,
    /// Fixed estimation-noise variance, overriding the link budget.
    #[serde(default)]
    pub sigma2: Option<f64>,
}

fn default_tx_power() -> f64 {
    42.0
}

fn default_tx_gain() -> f64 {
    45.0
}

fn default_rx_gain() -> f64 {
    20.0
}

fn default_bandwidth() -> f64 {
    10.0e6
}

fn default_noise_psd() -> f64 {
    -170.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    Naive,
    Dpll,
    Differential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainPolicy {
    #[default]
    Optimal,
    Fixed,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerSection {
    pub kind: TrackerKind,
    pub sample_period_s: f64,
    #[serde(default)]
    pub gain_policy: GainPolicy,
    /// Loop gain `K` for the fixed policy, 1/(rad·s).
    #[serde(default)]
    pub gain: Option<f64>,
    /// Residual Doppler used for gain selection and ramped inputs, rad/s.
    /// Defaults to the orbital bound (single antenna) or the largest
    /// differential phase rate of the pass (differential).
    #[serde(default)]
    pub doppler_rad_s: Option<f64>,
    /// Delay after the window start at which the uplink phase is fed back
    /// and the uplink estimate re-anchored, s. Without it the only feedback
    /// is at the first sample.
    #[serde(default)]
    pub feedback_delay_s: Option<f64>,
    /// Time at which a one-cycle downlink slip is forced, s.
    #[serde(default)]
    pub inject_slip_at_s: Option<f64>,
    /// Condition-number limit above which ZF is refused.
    #[serde(default = "default_cond_limit")]
    pub cond_limit: f64,
}

fn default_cond_limit() -> f64 {
    crate::precoding::DEFAULT_COND_LIMIT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DopplerMode {
    #[default]
    Zero,
    Ramp,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    /// Censoring horizon in samples; defaults to 50× the prediction.
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub doppler: DopplerMode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Write (and evaluate precoding on) every n-th sample of a pass.
    #[serde(default = "one")]
    pub record_every: u64,
}

fn one() -> u64 {
    1
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            path: None,
            record_every: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.link_params_base()?.validate()?;
        let t = &self.tracker;
        if !(t.sample_period_s > 0.0) {
            return Err(Error::invalid("sample_period_s must be positive"));
        }
        if t.gain_policy == GainPolicy::Fixed && !t.gain.is_some_and(|k| k > 0.0) {
            return Err(Error::invalid("the fixed gain policy needs a positive `gain`"));
        }
        if t.kind == TrackerKind::Differential && self.array.num_antennas < 2 {
            return Err(Error::invalid("the differential tracker needs at least two antennas"));
        }
        if let Some(s) = &self.sweep {
            if s.trials == 0 {
                return Err(Error::invalid("trials must be at least 1"));
            }
            if s.snr_db.is_empty() {
                return Err(Error::invalid("the SNR grid must not be empty"));
            }
        }
        if self.output.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        if let Some(s) = self.link.sigma2 {
            if !(s >= 0.0) {
                return Err(Error::invalid("sigma2 must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn orbit(&self) -> OrbitConfig {
        OrbitConfig {
            altitude_m: self.orbit.altitude_m,
            earth_radius_m: self.orbit.earth_radius_m,
            gravitational_parameter: self.orbit.gravitational_parameter,
        }
    }

    pub fn array(&self) -> ArrayConfig {
        ArrayConfig::new(self.array.num_antennas, self.array.spacing_m).with_azimuth(self.array.azimuth_deg.to_radians())
    }

    pub fn tracks(&self) -> Vec<SatelliteTrack> {
        self.orbit
            .satellites
            .iter()
            .map(|s| SatelliteTrack {
                along_track_rad: s.along_track_deg.to_radians(),
                cross_track_rad: s.cross_track_deg.to_radians(),
                direction: if s.reverse { PassDirection::Reverse } else { PassDirection::Forward },
            })
            .collect()
    }

    pub fn model(&self) -> Result<PassModel> {
        PassModel::new(self.orbit(), self.array(), self.tracks())
    }

    pub fn budget(&self) -> LinkBudget {
        LinkBudget {
            tx_power_dbm: self.link.tx_power_dbm,
            tx_gain_dbi: self.link.tx_gain_dbi,
            rx_gain_dbi: self.link.rx_gain_dbi,
            bandwidth_hz: self.link.bandwidth_hz,
            noise_psd_dbm_hz: self.link.noise_psd_dbm_hz,
        }
    }

    /// Simulated window: the configured one, else the interval during which
    /// every satellite is visible.
    pub fn window(&self) -> Result<TimeWindow> {
        let model = self.model()?;
        let visible = model.common_visible_window();
        let start = match (self.orbit.window_start_s, visible) {
            (Some(s), _) => s,
            (None, Some(w)) => w.start_s,
            (None, None) => return Err(Error::NoVisibleSamples),
        };
        let duration = match (self.orbit.window_s, visible) {
            (Some(d), _) => d,
            (None, Some(w)) => w.end_s() - start,
            (None, None) => return Err(Error::NoVisibleSamples),
        };
        if !(duration > 0.0) {
            return Err(Error::invalid("simulated window is empty"));
        }
        Ok(TimeWindow::new(start, duration))
    }

    fn link_params_base(&self) -> Result<LinkParams> {
        let l = self.orbit.satellites.len();
        let mut p = LinkParams::new(self.link.f_c_down_hz, self.link.f_c_up_hz, l);
        let fill = |v: &[f64], name: &str| -> Result<Vec<f64>> {
            match v.len() {
                0 => Ok(vec![0.0; l]),
                n if n == l => Ok(v.to_vec()),
                _ => Err(Error::invalid(format!("{name} needs one entry per satellite"))),
            }
        };
        p.freq_offset_down = fill(&self.link.freq_offset_down_hz, "freq_offset_down_hz")?;
        p.freq_offset_up = fill(&self.link.freq_offset_up_hz, "freq_offset_up_hz")?;
        let budget = self.budget();
        p.gain_const_down = vec![budget.gain_constant(self.link.f_c_down_hz); l];
        p.gain_const_up = vec![budget.gain_constant(self.link.f_c_up_hz); l];
        p.est_noise_var = self.link.sigma2.unwrap_or(0.0);
        Ok(p)
    }

    /// Link parameters with the unknown phase offsets drawn from the
    /// scenario seed when requested.
    pub fn link_params(&self) -> Result<LinkParams> {
        let mut p = self.link_params_base()?;
        if self.link.random_phase_offsets {
            let mut r = crate::rng::stream(self.seed, u64::MAX, 0);
            let freqs = (p.freq_offset_down.clone(), p.freq_offset_up.clone());
            p.randomize_offsets(&mut r, 0.0);
            (p.freq_offset_down, p.freq_offset_up) = freqs;
        }
        Ok(p)
    }

    /// Residual Doppler (rad/s) used for gain selection and ramped inputs.
    pub fn doppler_rad_s(&self) -> Result<f64> {
        if let Some(d) = self.tracker.doppler_rad_s {
            return Ok(d);
        }
        let t = self.tracker.sample_period_s;
        match self.tracker.kind {
            TrackerKind::Differential => {
                let model = self.model()?;
                let (rise, set) = model.tracks[0]
                    .visible_window(&model.orbit)
                    .ok_or(Error::NoVisibleSamples)?;
                let window = TimeWindow::new(rise, set - rise);
                let m = model.num_antennas() - 1;
                let rate = model.max_abs_differential_range_rate(m, 0, window, 20_001);
                Ok(2.0 * std::f64::consts::PI * self.link.f_c_down_hz * rate / SPEED_OF_LIGHT)
            }
            _ => Ok(increment_bound(&self.orbit(), self.link.f_c_down_hz, t) / t),
        }
    }
}
