//! Satellite-pass kinematics over a fixed multi-antenna terminal.
//!
//! The Earth is a non-rotating sphere centred at the origin and the terminal
//! sits at `(0, 0, R_E)`, so its zenith is `+z`. The local tangent plane is
//! spanned by `+x` (along-track for the default pass) and `+y` (cross-track).
//! Each satellite flies a circular orbit of radius `R = R_E + h`; with zero
//! offsets it crosses the terminal zenith at `t = 0`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};

use crate::error::{Error, Result};

/// Circular orbit shell shared by every satellite of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitConfig {
    pub altitude_m: f64,
    pub earth_radius_m: f64,
    pub gravitational_parameter: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self::with_altitude(1.0e6)
    }
}

impl OrbitConfig {
    pub const EARTH_RADIUS_M: f64 = 6.371e6;
    pub const EARTH_MU: f64 = 3.986004418e14;

    pub fn with_altitude(altitude_m: f64) -> Self {
        Self {
            altitude_m,
            earth_radius_m: Self::EARTH_RADIUS_M,
            gravitational_parameter: Self::EARTH_MU,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.altitude_m > 0.0 && self.altitude_m.is_finite()) {
            return Err(Error::invalid(format!(
                "orbit altitude must be positive, got {}",
                self.altitude_m
            )));
        }
        if !(self.earth_radius_m > 0.0) || !(self.gravitational_parameter > 0.0) {
            return Err(Error::invalid("earth radius and mu must be positive"));
        }
        Ok(())
    }

    /// Orbit radius `R` measured from the Earth's centre.
    pub fn radius(&self) -> f64 {
        self.earth_radius_m + self.altitude_m
    }

    /// Orbital speed `2πR / T_o`.
    pub fn speed(&self) -> f64 {
        2.0 * PI * self.radius() / orbital_period(self)
    }

    /// Mean motion in rad/s.
    pub fn angular_rate(&self) -> f64 {
        2.0 * PI / orbital_period(self)
    }
}

/// Orbital period from Kepler's third law, `2π·sqrt(R³/μ)`.
pub fn orbital_period(orbit: &OrbitConfig) -> f64 {
    let r = orbit.radius();
    2.0 * PI * (r * r * r / orbit.gravitational_parameter).sqrt()
}

/// Direction of travel along the orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PassDirection {
    #[default]
    Forward,
    Reverse,
}

impl PassDirection {
    fn sign(self) -> f64 {
        match self {
            PassDirection::Forward => 1.0,
            PassDirection::Reverse => -1.0,
        }
    }
}

/// Placement of one satellite on the shared orbit shell.
///
/// `along_track_rad` is the orbital anomaly at `t = 0` (0 means the satellite
/// is at its closest approach to the terminal). `cross_track_rad` tilts the
/// orbital plane about the along-track axis, so the closest approach happens
/// at that central angle off zenith.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SatelliteTrack {
    pub along_track_rad: f64,
    pub cross_track_rad: f64,
    pub direction: PassDirection,
}

impl SatelliteTrack {
    pub fn zenith() -> Self {
        Self::default()
    }

    fn anomaly(&self, orbit: &OrbitConfig, t: f64) -> f64 {
        self.direction.sign() * orbit.angular_rate() * t + self.along_track_rad
    }

    fn plane_axes(&self) -> (Vector3<f64>, Vector3<f64>) {
        let (sb, cb) = self.cross_track_rad.sin_cos();
        (Vector3::x(), Vector3::new(0.0, sb, cb))
    }

    pub fn position(&self, orbit: &OrbitConfig, t: f64) -> Vector3<f64> {
        let (ex, ez) = self.plane_axes();
        let (s, c) = self.anomaly(orbit, t).sin_cos();
        orbit.radius() * (s * ex + c * ez)
    }

    pub fn velocity(&self, orbit: &OrbitConfig, t: f64) -> Vector3<f64> {
        let (ex, ez) = self.plane_axes();
        let (s, c) = self.anomaly(orbit, t).sin_cos();
        orbit.radius() * self.direction.sign() * orbit.angular_rate() * (c * ex - s * ez)
    }

    /// Times at which this satellite rises and sets above the terminal's
    /// horizon, or `None` if it never becomes visible.
    pub fn visible_window(&self, orbit: &OrbitConfig) -> Option<(f64, f64)> {
        let reach = orbit.radius() * self.cross_track_rad.cos();
        if reach < orbit.earth_radius_m {
            return None;
        }
        let half = (orbit.earth_radius_m / reach).clamp(-1.0, 1.0).acos();
        let w = self.direction.sign() * orbit.angular_rate();
        let a = (-half - self.along_track_rad) / w;
        let b = (half - self.along_track_rad) / w;
        Some((a.min(b), a.max(b)))
    }
}

/// Position of a zenith-crossing satellite at time `t`.
pub fn satellite_position(orbit: &OrbitConfig, t: f64) -> Vector3<f64> {
    SatelliteTrack::zenith().position(orbit, t)
}

/// Linear horizontal antenna array centred on the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    pub num_antennas: usize,
    pub spacing_m: f64,
    /// Unit vector of the array axis in the local tangent plane (z = 0).
    pub orientation: Vector3<f64>,
}

impl ArrayConfig {
    pub fn new(num_antennas: usize, spacing_m: f64) -> Self {
        Self {
            num_antennas,
            spacing_m,
            orientation: Vector3::x(),
        }
    }

    /// Array axis at `azimuth_rad` from the along-track direction.
    pub fn with_azimuth(mut self, azimuth_rad: f64) -> Self {
        let (s, c) = azimuth_rad.sin_cos();
        self.orientation = Vector3::new(c, s, 0.0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(Error::invalid("array needs at least one antenna"));
        }
        if self.num_antennas >= 2 && !(self.spacing_m > 0.0) {
            return Err(Error::invalid("antenna spacing must be positive"));
        }
        if (self.orientation.norm() - 1.0).abs() > 1e-9 || self.orientation.z.abs() > 1e-9 {
            return Err(Error::invalid(
                "array orientation must be a horizontal unit vector",
            ));
        }
        Ok(())
    }

    /// Antenna `m` (0-based) in Earth-centred coordinates.
    pub fn antenna_position(&self, earth_radius_m: f64, m: usize) -> Vector3<f64> {
        let centre = 0.5 * (self.num_antennas as f64 - 1.0);
        let offset = (m as f64 - centre) * self.spacing_m;
        Vector3::new(0.0, 0.0, earth_radius_m) + offset * self.orientation
    }
}

/// Everything needed to evaluate an antenna-to-satellite range at any
/// instant.
#[derive(Debug, Clone)]
pub struct PassModel {
    pub orbit: OrbitConfig,
    pub array: ArrayConfig,
    pub tracks: Vec<SatelliteTrack>,
    antennas: Vec<Vector3<f64>>,
}

impl PassModel {
    pub fn new(orbit: OrbitConfig, array: ArrayConfig, tracks: Vec<SatelliteTrack>) -> Result<Self> {
        orbit.validate()?;
        array.validate()?;
        if tracks.is_empty() {
            return Err(Error::invalid("at least one satellite is required"));
        }
        let antennas = (0..array.num_antennas)
            .map(|m| array.antenna_position(orbit.earth_radius_m, m))
            .collect();
        Ok(Self {
            orbit,
            array,
            tracks,
            antennas,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.antennas.len()
    }

    pub fn num_satellites(&self) -> usize {
        self.tracks.len()
    }

    /// `r_{m,ℓ}(t)`.
    pub fn range(&self, m: usize, sat: usize, t: f64) -> f64 {
        (self.tracks[sat].position(&self.orbit, t) - self.antennas[m]).norm()
    }

    /// `r_{m,ℓ}(t) − r_{1,ℓ}(t)`, written as `b·(a_m + a_1 − 2p)/(r_m + r_1)`
    /// with `b = a_m − a_1` so that it keeps full relative precision when
    /// the ranges themselves are millions of metres.
    pub fn range_difference(&self, m: usize, sat: usize, t: f64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        let p = self.tracks[sat].position(&self.orbit, t);
        let baseline = (m as f64 * self.array.spacing_m) * self.array.orientation;
        let sum = (p - self.antennas[m]).norm() + (p - self.antennas[0]).norm();
        baseline.dot(&(self.antennas[m] + self.antennas[0] - 2.0 * p)) / sum
    }

    /// Fills the `M × L` matrices of ranges and of range differences
    /// `r_m − r_1` at time `t`.
    pub fn ranges_into(&self, t: f64, ranges: &mut DMatrix<f64>, diffs: &mut DMatrix<f64>) {
        for sat in 0..self.tracks.len() {
            self.satellite_ranges_into(sat, t, ranges.column_mut(sat).as_mut_slice(), diffs.column_mut(sat).as_mut_slice());
        }
    }

    /// Ranges and range differences of every antenna to one satellite,
    /// evaluating the satellite position once.
    pub fn satellite_ranges_into(&self, sat: usize, t: f64, ranges: &mut [f64], diffs: &mut [f64]) {
        let p = self.tracks[sat].position(&self.orbit, t);
        let r0 = (p - self.antennas[0]).norm();
        ranges[0] = r0;
        diffs[0] = 0.0;
        for m in 1..self.antennas.len() {
            let rm = (p - self.antennas[m]).norm();
            let baseline = (m as f64 * self.array.spacing_m) * self.array.orientation;
            ranges[m] = rm;
            diffs[m] = baseline.dot(&(self.antennas[m] + self.antennas[0] - 2.0 * p)) / (rm + r0);
        }
    }

    /// `d r_{m,ℓ}/dt`, positive while receding.
    pub fn range_rate(&self, m: usize, sat: usize, t: f64) -> f64 {
        let track = &self.tracks[sat];
        let los = track.position(&self.orbit, t) - self.antennas[m];
        los.dot(&track.velocity(&self.orbit, t)) / los.norm()
    }

    /// Rate of change of `r_{m,ℓ} − r_{1,ℓ}`.
    pub fn differential_range_rate(&self, m: usize, sat: usize, t: f64) -> f64 {
        self.range_rate(m, sat, t) - self.range_rate(0, sat, t)
    }

    /// Elevation of satellite `sat` seen from the terminal centre.
    pub fn elevation(&self, sat: usize, t: f64) -> f64 {
        let terminal = Vector3::new(0.0, 0.0, self.orbit.earth_radius_m);
        let los = self.tracks[sat].position(&self.orbit, t) - terminal;
        (los.z / los.norm()).clamp(-1.0, 1.0).asin()
    }

    /// Interval during which every satellite is above the horizon.
    pub fn common_visible_window(&self) -> Option<TimeWindow> {
        let mut start = f64::NEG_INFINITY;
        let mut end = f64::INFINITY;
        for track in &self.tracks {
            let (a, b) = track.visible_window(&self.orbit)?;
            start = start.max(a);
            end = end.min(b);
        }
        (end > start).then(|| TimeWindow::new(start, end - start))
    }

    /// `r(t0 + nT) − r(t0 + (n−1)T)` evaluated directly from the model.
    pub fn range_increment_at(&self, m: usize, sat: usize, t0: f64, period: f64, n: u64) -> f64 {
        let t_now = t0 + n as f64 * period;
        let t_prev = t0 + (n - 1) as f64 * period;
        self.range(m, sat, t_now) - self.range(m, sat, t_prev)
    }

    /// Differential increment `d̆` evaluated directly from the model.
    pub fn differential_range_increment_at(
        &self,
        m: usize,
        sat: usize,
        t0: f64,
        period: f64,
        n: u64,
    ) -> f64 {
        if m == 0 {
            return 0.0;
        }
        let t_now = t0 + n as f64 * period;
        let t_prev = t0 + (n - 1) as f64 * period;
        self.range_difference(m, sat, t_prev) - self.range_difference(m, sat, t_now)
    }

    /// Largest `|range increment|` over a window sampled at `period`, scanning
    /// every `stride`-th increment (plus the last one). Used for passes too
    /// long to materialise sample by sample.
    pub fn max_abs_range_increment(
        &self,
        m: usize,
        sat: usize,
        window: TimeWindow,
        period: f64,
        stride: u64,
    ) -> f64 {
        let n_max = window.sample_count(period).saturating_sub(1);
        let stride = stride.max(1);
        let mut best: f64 = 0.0;
        let mut n = 1;
        while n <= n_max {
            best = best.max(self.range_increment_at(m, sat, window.start_s, period, n).abs());
            n += stride;
        }
        if n_max >= 1 {
            best = best.max(self.range_increment_at(m, sat, window.start_s, period, n_max).abs());
        }
        best
    }

    /// Largest `|d r/dt|` over the window, probed on `points` evenly spaced
    /// instants.
    pub fn max_abs_range_rate(&self, m: usize, sat: usize, window: TimeWindow, points: usize) -> f64 {
        window
            .probe(points)
            .map(|t| self.range_rate(m, sat, t).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_differential_range_rate(
        &self,
        m: usize,
        sat: usize,
        window: TimeWindow,
        points: usize,
    ) -> f64 {
        window
            .probe(points)
            .map(|t| self.differential_range_rate(m, sat, t).abs())
            .fold(0.0, f64::max)
    }
}

/// Half-open time interval `[start, start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub start_s: f64,
    pub duration_s: f64,
}

impl TimeWindow {
    pub fn new(start_s: f64, duration_s: f64) -> Self {
        Self {
            start_s,
            duration_s,
        }
    }

    /// Window of `duration_s` centred on `t`.
    pub fn centred(t: f64, duration_s: f64) -> Self {
        Self::new(t - 0.5 * duration_s, duration_s)
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }

    /// Number of samples `t = start + nT` that fit in the window.
    pub fn sample_count(&self, period: f64) -> u64 {
        (self.duration_s / period).floor() as u64 + 1
    }

    fn probe(&self, points: usize) -> impl Iterator<Item = f64> + '_ {
        let points = points.max(2);
        (0..points).map(move |i| self.start_s + self.duration_s * i as f64 / (points - 1) as f64)
    }
}

/// Whether samples with a satellite below the horizon are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    All,
    VisibleOnly,
}

/// One time sample of a pass.
#[derive(Debug, Clone)]
pub struct PassSample {
    pub t: f64,
    /// `M × L` ranges in metres.
    pub ranges: DMatrix<f64>,
    /// Elevation per satellite in radians.
    pub elevations: Vec<f64>,
}

/// Ranges for every antenna/satellite pair sampled at `t = t0 + nT`.
#[derive(Debug, Clone)]
pub struct PassGeometry {
    pub sample_period_s: f64,
    pub samples: Vec<PassSample>,
}

impl PassGeometry {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_antennas(&self) -> usize {
        self.samples.first().map_or(0, |s| s.ranges.nrows())
    }

    pub fn num_satellites(&self) -> usize {
        self.samples.first().map_or(0, |s| s.ranges.ncols())
    }

    pub fn range(&self, m: usize, sat: usize, n: usize) -> Result<f64> {
        self.check(m, sat, n)?;
        Ok(self.samples[n].ranges[(m, sat)])
    }

    fn check(&self, m: usize, sat: usize, n: usize) -> Result<()> {
        if m >= self.num_antennas() || sat >= self.num_satellites() || n >= self.len() {
            return Err(Error::IndexOutOfRange {
                antenna: m,
                satellite: sat,
                sample: n,
            });
        }
        Ok(())
    }
}

/// Samples the model every `period` seconds over `window`.
pub fn compute_pass(
    model: &PassModel,
    period: f64,
    window: TimeWindow,
    visibility: Visibility,
) -> Result<PassGeometry> {
    if !(period > 0.0) || !(window.duration_s > 0.0) {
        return Err(Error::invalid("sample period and window must be positive"));
    }
    let (m_count, l_count) = (model.num_antennas(), model.num_satellites());
    let count = window.sample_count(period);
    let mut samples = Vec::with_capacity(count as usize);
    for n in 0..count {
        let t = window.start_s + n as f64 * period;
        let elevations: Vec<f64> = (0..l_count).map(|l| model.elevation(l, t)).collect();
        if visibility == Visibility::VisibleOnly && elevations.iter().any(|&e| e < 0.0) {
            continue;
        }
        let ranges = DMatrix::from_fn(m_count, l_count, |m, l| model.range(m, l, t));
        samples.push(PassSample {
            t,
            ranges,
            elevations,
        });
    }
    if samples.is_empty() {
        return Err(Error::NoVisibleSamples);
    }
    Ok(PassGeometry {
        sample_period_s: period,
        samples,
    })
}

/// `r_{m,ℓ}(nT) − r_{m,ℓ}((n−1)T)`.
pub fn range_increment(pass: &PassGeometry, m: usize, sat: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::IndexOutOfRange {
            antenna: m,
            satellite: sat,
            sample: n,
        });
    }
    Ok(pass.range(m, sat, n)? - pass.range(m, sat, n - 1)?)
}

/// `d̆_{m,ℓ}[n] = r_m((n−1)T) − r_1((n−1)T) − r_m(nT) + r_1(nT)`; identically
/// zero for the reference antenna `m = 0`.
pub fn differential_range_increment(
    pass: &PassGeometry,
    m: usize,
    sat: usize,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::IndexOutOfRange {
            antenna: m,
            satellite: sat,
            sample: n,
        });
    }
    let prev = pass.range(m, sat, n - 1)? - pass.range(0, sat, n - 1)?;
    let now = pass.range(m, sat, n)? - pass.range(0, sat, n)?;
    Ok(prev - now)
}
