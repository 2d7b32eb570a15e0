//! Line-of-sight FDD channel model and the noisy downlink estimates the
//! terminal sees.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::PassGeometry;
use crate::rng;
use crate::SPEED_OF_LIGHT;

/// Carrier plan and per-satellite impairments of the link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub f_c_down: f64,
    pub f_c_up: f64,
    pub freq_offset_down: Vec<f64>,
    pub freq_offset_up: Vec<f64>,
    pub phase_offset_down: Vec<f64>,
    pub phase_offset_up: Vec<f64>,
    pub gain_const_down: Vec<f64>,
    pub gain_const_up: Vec<f64>,
    /// Variance of the complex estimation noise on each unit-modulus entry.
    pub est_noise_var: f64,
    pub c: f64,
}

impl LinkParams {
    /// Ideal link for `num_satellites` satellites: no offsets, unit gains,
    /// noiseless estimates.
    pub fn new(f_c_down: f64, f_c_up: f64, num_satellites: usize) -> Self {
        Self {
            f_c_down,
            f_c_up,
            freq_offset_down: vec![0.0; num_satellites],
            freq_offset_up: vec![0.0; num_satellites],
            phase_offset_down: vec![0.0; num_satellites],
            phase_offset_up: vec![0.0; num_satellites],
            gain_const_down: vec![1.0; num_satellites],
            gain_const_up: vec![1.0; num_satellites],
            est_noise_var: 0.0,
            c: SPEED_OF_LIGHT,
        }
    }

    pub fn num_satellites(&self) -> usize {
        self.freq_offset_down.len()
    }

    /// `f_c^U / f_c^D`.
    pub fn ratio(&self) -> f64 {
        self.f_c_up / self.f_c_down
    }

    /// Draws phase offsets uniformly in `[−π, π]` and frequency offsets
    /// uniformly in `±max_freq_offset_hz`.
    pub fn randomize_offsets<R: Rng + ?Sized>(&mut self, rng: &mut R, max_freq_offset_hz: f64) {
        for l in 0..self.num_satellites() {
            self.phase_offset_down[l] = rng.random_range(-PI..=PI);
            self.phase_offset_up[l] = rng.random_range(-PI..=PI);
            if max_freq_offset_hz > 0.0 {
                self.freq_offset_down[l] = rng.random_range(-max_freq_offset_hz..=max_freq_offset_hz);
                self.freq_offset_up[l] = rng.random_range(-max_freq_offset_hz..=max_freq_offset_hz);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.num_satellites();
        if !(self.f_c_down > 0.0) || !(self.f_c_up > 0.0) {
            return Err(Error::invalid("carrier frequencies must be positive"));
        }
        if !(self.est_noise_var >= 0.0) {
            return Err(Error::invalid("noise variance must be non-negative"));
        }
        if !(self.c > 0.0) {
            return Err(Error::invalid("speed of light must be positive"));
        }
        let lens = [
            self.freq_offset_up.len(),
            self.phase_offset_down.len(),
            self.phase_offset_up.len(),
            self.gain_const_down.len(),
            self.gain_const_up.len(),
        ];
        if lens.iter().any(|&n| n != l) {
            return Err(Error::invalid("per-satellite parameter lengths disagree"));
        }
        if let Some(f) = self
            .freq_offset_down
            .iter()
            .find(|f| f.abs() > 1e-3 * self.f_c_down)
        {
            return Err(Error::invalid(format!(
                "downlink frequency offset {f} Hz is not small against the carrier"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkDirection {
    Down,
    Up,
}

/// `Θ^D = −2π(f_ℓ^D + f_c^D)·r/c + 2π f_ℓ^D·t + α_ℓ^D`, unwrapped.
pub fn phase_down(params: &LinkParams, sat: usize, range_m: f64, t_s: f64) -> f64 {
    let f = params.freq_offset_down[sat];
    -2.0 * PI * (f + params.f_c_down) * range_m / params.c
        + 2.0 * PI * f * t_s
        + params.phase_offset_down[sat]
}

/// `Θ^U = −2π f_c^U·r/c`.
pub fn phase_up(params: &LinkParams, range_m: f64) -> f64 {
    -2.0 * PI * params.f_c_up * range_m / params.c
}

/// Phase of antenna `m` relative to the reference antenna, from the range
/// difference `r_m − r_1`.
pub fn phase_diff(params: &LinkParams, direction: LinkDirection, sat: usize, range_diff_m: f64) -> f64 {
    let f = match direction {
        LinkDirection::Down => params.freq_offset_down[sat] + params.f_c_down,
        LinkDirection::Up => params.f_c_up,
    };
    -2.0 * PI * f * range_diff_m / params.c
}

/// Unwrapped `Θ^D_{m,ℓ}[n]` for a stored pass.
pub fn true_phase_down(pass: &PassGeometry, params: &LinkParams, m: usize, sat: usize, n: usize) -> Result<f64> {
    let r = pass.range(m, sat, n)?;
    Ok(phase_down(params, sat, r, n as f64 * pass.sample_period_s))
}

/// Unwrapped `Θ^U_{m,ℓ}[n]` for a stored pass.
pub fn true_phase_up(pass: &PassGeometry, params: &LinkParams, m: usize, sat: usize, n: usize) -> Result<f64> {
    Ok(phase_up(params, pass.range(m, sat, n)?))
}

/// `Θ̆_{m,ℓ}[n]`, zero for the reference antenna.
pub fn true_phase_diff(
    pass: &PassGeometry,
    params: &LinkParams,
    direction: LinkDirection,
    m: usize,
    sat: usize,
    n: usize,
) -> Result<f64> {
    let diff = pass.range(m, sat, n)? - pass.range(0, sat, n)?;
    Ok(phase_diff(params, direction, sat, diff))
}

/// `2π f_c^U / f_c^D`: the uplink phase jump caused by one downlink cycle slip.
pub fn slip_jump_magnitude(params: &LinkParams) -> f64 {
    2.0 * PI * params.ratio()
}

/// True channel state at one sample.
///
/// The full channel factors as `H̃ = H·D` with `H` unit-modulus and `D`
/// diagonal, both directly (`theta_*`, `gain_*`) and relative to antenna 0
/// (`theta_*_diff`, `gain_*_diff`).
#[derive(Debug, Clone)]
pub struct ChannelSnapshot {
    pub theta_down: DMatrix<f64>,
    pub theta_up: DMatrix<f64>,
    pub theta_down_diff: DMatrix<f64>,
    pub theta_up_diff: DMatrix<f64>,
    pub gain_down: Vec<Complex64>,
    pub gain_up: Vec<Complex64>,
    pub gain_down_diff: Vec<Complex64>,
    pub gain_up_diff: Vec<Complex64>,
    /// Downlink estimates `ĥ^D`; noiseless until [`observe_down`] fills them.
    pub observed_down: DMatrix<Complex64>,
}

impl ChannelSnapshot {
    /// Builds the snapshot from an `M × L` range matrix at time `t = nT`.
    pub fn from_ranges(params: &LinkParams, ranges: &DMatrix<f64>, t_s: f64) -> Self {
        let diffs = DMatrix::from_fn(ranges.nrows(), ranges.ncols(), |m, l| ranges[(m, l)] - ranges[(0, l)]);
        Self::from_ranges_and_differences(params, ranges, &diffs, t_s)
    }

    /// As [`Self::from_ranges`], with the range differences `r_m − r_1`
    /// supplied separately at higher precision.
    pub fn from_ranges_and_differences(
        params: &LinkParams,
        ranges: &DMatrix<f64>,
        range_diffs: &DMatrix<f64>,
        t_s: f64,
    ) -> Self {
        let (m_count, l_count) = ranges.shape();
        let theta_down = DMatrix::from_fn(m_count, l_count, |m, l| phase_down(params, l, ranges[(m, l)], t_s));
        let theta_up = DMatrix::from_fn(m_count, l_count, |m, l| phase_up(params, ranges[(m, l)]));
        let theta_down_diff = DMatrix::from_fn(m_count, l_count, |m, l| {
            phase_diff(params, LinkDirection::Down, l, range_diffs[(m, l)])
        });
        let theta_up_diff = DMatrix::from_fn(m_count, l_count, |m, l| {
            phase_diff(params, LinkDirection::Up, l, range_diffs[(m, l)])
        });
        let mut gain_down = Vec::with_capacity(l_count);
        let mut gain_up = Vec::with_capacity(l_count);
        let mut gain_down_diff = Vec::with_capacity(l_count);
        let mut gain_up_diff = Vec::with_capacity(l_count);
        for l in 0..l_count {
            let r1 = ranges[(0, l)];
            let d = Complex64::from(params.gain_const_down[l] / r1);
            let u = Complex64::from_polar(
                params.gain_const_up[l] / r1,
                -2.0 * PI * params.freq_offset_up[l] * t_s + params.phase_offset_up[l],
            );
            gain_down.push(d);
            gain_up.push(u);
            gain_down_diff.push(d * Complex64::cis(theta_down[(0, l)]));
            gain_up_diff.push(u * Complex64::cis(theta_up[(0, l)]));
        }
        let observed_down = theta_down.map(Complex64::cis);
        Self {
            theta_down,
            theta_up,
            theta_down_diff,
            theta_up_diff,
            gain_down,
            gain_up,
            gain_down_diff,
            gain_up_diff,
            observed_down,
        }
    }

    pub fn at(pass: &PassGeometry, params: &LinkParams, n: usize) -> Result<Self> {
        let sample = pass.samples.get(n).ok_or(Error::IndexOutOfRange {
            antenna: 0,
            satellite: 0,
            sample: n,
        })?;
        Ok(Self::from_ranges(params, &sample.ranges, n as f64 * pass.sample_period_s))
    }

    pub fn num_antennas(&self) -> usize {
        self.theta_down.nrows()
    }

    pub fn num_satellites(&self) -> usize {
        self.theta_down.ncols()
    }

    pub fn h_down(&self) -> DMatrix<Complex64> {
        self.theta_down.map(Complex64::cis)
    }

    pub fn h_up(&self) -> DMatrix<Complex64> {
        self.theta_up.map(Complex64::cis)
    }

    pub fn h_down_diff(&self) -> DMatrix<Complex64> {
        self.theta_down_diff.map(Complex64::cis)
    }

    pub fn h_up_diff(&self) -> DMatrix<Complex64> {
        self.theta_up_diff.map(Complex64::cis)
    }

    /// `H̃^D = H^D·D^D`.
    pub fn full_down(&self) -> DMatrix<Complex64> {
        scale_columns(self.h_down(), &self.gain_down)
    }

    /// `H̃^U = H^U·D^U`.
    pub fn full_up(&self) -> DMatrix<Complex64> {
        scale_columns(self.h_up(), &self.gain_up)
    }
}

pub(crate) fn scale_columns(mut h: DMatrix<Complex64>, gains: &[Complex64]) -> DMatrix<Complex64> {
    for (mut col, g) in h.column_iter_mut().zip(gains) {
        col *= *g;
    }
    h
}

/// One independent noise stream per `(antenna, satellite)` link.
#[derive(Debug, Clone)]
pub struct NoiseBank {
    streams: Vec<ChaCha8Rng>,
    num_satellites: usize,
}

impl NoiseBank {
    pub fn new(master_seed: u64, trial: u64, num_antennas: usize, num_satellites: usize) -> Self {
        let streams = (0..num_antennas * num_satellites)
            .map(|id| rng::stream(master_seed, trial, id as u64))
            .collect();
        Self {
            streams,
            num_satellites,
        }
    }

    pub fn draw(&mut self, m: usize, sat: usize, variance: f64) -> Complex64 {
        rng::complex_gaussian(&mut self.streams[m * self.num_satellites + sat], variance)
    }
}

/// Noisy estimate of a unit-modulus entry with phase `theta`.
///
/// The noise `z` is applied in the signal's own frame, `e^{jθ}(1 + z)`. For
/// circularly-symmetric `z` this has the same law as `e^{jθ} + w`, and it
/// keeps a given noise realisation meaningful when the phase is changed.
pub fn noisy_entry(theta: f64, z: Complex64) -> Complex64 {
    Complex64::cis(reduce_phase(theta)) * (1.0 + z)
}

/// `2π` split as `TAU_HI + TAU_LO`, with `TAU_HI` holding 24 significant
/// bits so that `k·TAU_HI` is exact for any `|k| < 2²⁹`.
const TAU_HI: f64 = 6.283_185_482_025_146_5;
const TAU_LO: f64 = -1.748_455_600_074_497e-7;

/// `θ` reduced to about `[−π, π]`, so that sin/cos of unwrapped carrier
/// phases (around 1e9 rad) avoid their slow reduction path.
pub fn reduce_phase(theta: f64) -> f64 {
    let k = (theta / std::f64::consts::TAU).round();
    (theta - k * TAU_HI) - k * TAU_LO
}

/// Fills `snapshot.observed_down` with `exp(jΘ^D) + w`, `w ~ CN(0, σ²)`.
pub fn observe_down<'a>(snapshot: &'a mut ChannelSnapshot, noise: &mut NoiseBank, variance: f64) -> &'a DMatrix<Complex64> {
    let (m_count, l_count) = snapshot.theta_down.shape();
    for m in 0..m_count {
        for l in 0..l_count {
            let z = noise.draw(m, l, variance);
            snapshot.observed_down[(m, l)] = noisy_entry(snapshot.theta_down[(m, l)], z);
        }
    }
    &snapshot.observed_down
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{compute_pass, ArrayConfig, OrbitConfig, PassModel, SatelliteTrack, TimeWindow, Visibility};
    use proptest::prelude::*;

    #[test]
    fn phase_reduction_is_accurate() {
        for &theta in &[0.0, 3.0, -3.5, 1.0e4 + 0.25, -6.0e8 - 0.1, 9.87654321e8] {
            let r = reduce_phase(theta);
            assert!(r.abs() <= PI + 1e-9);
            let z = Complex64::cis(r) - Complex64::cis(theta);
            assert!(z.norm() < 1e-7, "{theta}: {}", z.norm());
        }
        // Exact multiples of the f64 value of 2π reduce to within a few ulps
        // of the true residue.
        let k = 123_456_789.0;
        let r = reduce_phase(k * 2.0 * PI);
        assert!(r.abs() < 1e-6);
    }

    fn params() -> LinkParams {
        let mut p = LinkParams::new(30e9, 20e9, 2);
        p.freq_offset_down = vec![4e3, -2e3];
        p.freq_offset_up = vec![1e3, 3e3];
        p.phase_offset_down = vec![0.3, -1.2];
        p.phase_offset_up = vec![2.0, 0.1];
        p.gain_const_down = vec![1e5, 2e5];
        p.gain_const_up = vec![3e5, 5e4];
        p
    }

    fn two_sat_pass() -> PassGeometry {
        let model = PassModel::new(
            OrbitConfig::with_altitude(1.0e6),
            ArrayConfig::new(3, 0.5).with_azimuth(0.4),
            vec![
                SatelliteTrack::zenith(),
                SatelliteTrack {
                    along_track_rad: 0.05,
                    cross_track_rad: 0.1,
                    ..Default::default()
                },
            ],
        )
        .unwrap();
        compute_pass(&model, 1e-3, TimeWindow::new(-20.0, 0.01), Visibility::All).unwrap()
    }

    #[test]
    fn one_wavelength_is_minus_two_pi() {
        let p = LinkParams::new(30e9, 20e9, 1);
        assert!((phase_down(&p, 0, p.c / p.f_c_down, 0.0) + 2.0 * PI).abs() < 1e-12);
        assert!((phase_up(&p, p.c / p.f_c_up) + 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn zero_range_leaves_offset_terms() {
        let p = params();
        let got = phase_down(&p, 0, 0.0, 0.25);
        assert!((got - (2.0 * PI * 4e3 * 0.25 + 0.3)).abs() < 1e-9);
    }

    #[test]
    fn increments_scale_with_carrier_ratio() {
        let p = LinkParams::new(30e9, 20e9, 2);
        let pass = two_sat_pass();
        for n in 1..pass.len() {
            let dd = true_phase_down(&pass, &p, 1, 0, n).unwrap() - true_phase_down(&pass, &p, 1, 0, n - 1).unwrap();
            let du = true_phase_up(&pass, &p, 1, 0, n).unwrap() - true_phase_up(&pass, &p, 1, 0, n - 1).unwrap();
            let dr = pass.range(1, 0, n).unwrap() - pass.range(1, 0, n - 1).unwrap();
            assert!((dd + 2.0 * PI * p.f_c_down / p.c * dr).abs() < 1e-6);
            assert!((du - p.ratio() * dd).abs() < 1e-6);
        }
    }

    #[test]
    fn reference_antenna_diff_phase_is_zero() {
        let pass = two_sat_pass();
        let p = params();
        for dir in [LinkDirection::Down, LinkDirection::Up] {
            assert_eq!(true_phase_diff(&pass, &p, dir, 0, 1, 3).unwrap(), 0.0);
        }
    }

    #[test]
    fn diff_phase_ignores_uplink_offset_and_barely_moves_with_downlink_offset() {
        let pass = two_sat_pass();
        let mut p = LinkParams::new(30e9, 20e9, 2);
        let up0 = true_phase_diff(&pass, &p, LinkDirection::Up, 2, 0, 4).unwrap();
        let down0 = true_phase_diff(&pass, &p, LinkDirection::Down, 2, 0, 4).unwrap();
        p.freq_offset_up[0] = 1e6;
        p.freq_offset_down[0] = 1e-3 * p.f_c_down;
        let up1 = true_phase_diff(&pass, &p, LinkDirection::Up, 2, 0, 4).unwrap();
        let down1 = true_phase_diff(&pass, &p, LinkDirection::Down, 2, 0, 4).unwrap();
        assert_eq!(up0, up1);
        assert!(((down1 - down0) / down0).abs() <= 1e-3 + 1e-12);
    }

    #[test]
    fn slip_jump_examples() {
        let mut p = LinkParams::new(30e9, 20e9, 1);
        assert!((slip_jump_magnitude(&p) - 4.1887902047863905).abs() < 1e-12);
        p.f_c_up = 30e9;
        assert!((slip_jump_magnitude(&p) - 2.0 * PI).abs() < 1e-12);
        p.f_c_up = 15e9;
        assert!((slip_jump_magnitude(&p) - PI).abs() < 1e-12);
    }

    /// Per-entry channel written out term by term, independent of the
    /// factorised construction.
    fn direct_entry_down(p: &LinkParams, r: &DMatrix<f64>, m: usize, l: usize, t: f64) -> Complex64 {
        let amp = p.gain_const_down[l] / r[(0, l)];
        let carrier = Complex64::cis(-2.0 * PI * (p.freq_offset_down[l] + p.f_c_down) * r[(m, l)] / p.c);
        let cfo = Complex64::cis(2.0 * PI * p.freq_offset_down[l] * t);
        amp * carrier * cfo * Complex64::cis(p.phase_offset_down[l])
    }

    fn direct_entry_up(p: &LinkParams, r: &DMatrix<f64>, m: usize, l: usize, t: f64) -> Complex64 {
        let amp = p.gain_const_up[l] / r[(0, l)];
        amp * Complex64::cis(-2.0 * PI * p.f_c_up * r[(m, l)] / p.c)
            * Complex64::cis(-2.0 * PI * p.freq_offset_up[l] * t)
            * Complex64::cis(p.phase_offset_up[l])
    }

    #[test]
    fn factorisations_reproduce_direct_channel() {
        let pass = two_sat_pass();
        let p = params();
        for n in [0, 5, 10] {
            let snap = ChannelSnapshot::at(&pass, &p, n).unwrap();
            let r = &pass.samples[n].ranges;
            let t = n as f64 * pass.sample_period_s;
            let via_diff_down = scale_columns(snap.h_down_diff(), &snap.gain_down_diff);
            let via_diff_up = scale_columns(snap.h_up_diff(), &snap.gain_up_diff);
            let full_down = snap.full_down();
            let full_up = snap.full_up();
            for m in 0..3 {
                for l in 0..2 {
                    let d = direct_entry_down(&p, r, m, l, t);
                    let u = direct_entry_up(&p, r, m, l, t);
                    let tol_d = 1e-6 * d.norm();
                    let tol_u = 1e-6 * u.norm();
                    assert!((full_down[(m, l)] - d).norm() < tol_d);
                    assert!((via_diff_down[(m, l)] - d).norm() < tol_d);
                    assert!((full_up[(m, l)] - u).norm() < tol_u);
                    assert!((via_diff_up[(m, l)] - u).norm() < tol_u);
                }
            }
            for l in 0..2 {
                assert_eq!(snap.h_down_diff()[(0, l)], Complex64::new(1.0, 0.0));
                assert_eq!(snap.h_up_diff()[(0, l)], Complex64::new(1.0, 0.0));
            }
        }
    }

    #[test]
    fn measured_phase_matches_wrapped_closed_form() {
        let pass = two_sat_pass();
        let mut p = LinkParams::new(30e9, 20e9, 2);
        p.phase_offset_down = vec![1.1, -0.4];
        let snap = ChannelSnapshot::at(&pass, &p, 7).unwrap();
        for m in 0..3 {
            for l in 0..2 {
                let r = pass.samples[7].ranges[(m, l)];
                let y = -2.0 * PI * p.f_c_down * r / p.c + p.phase_offset_down[l];
                let expected = (y + PI).rem_euclid(2.0 * PI) - PI;
                let got = snap.observed_down[(m, l)].arg();
                let d = (got - expected).abs();
                assert!(d.min(2.0 * PI - d) < 1e-6);
            }
        }
    }

    #[test]
    fn noiseless_observation_on_unit_circle() {
        let pass = two_sat_pass();
        let mut snap = ChannelSnapshot::at(&pass, &params(), 0).unwrap();
        let mut bank = NoiseBank::new(1, 0, 3, 2);
        observe_down(&mut snap, &mut bank, 0.0);
        assert!(snap.observed_down.iter().all(|h| (h.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn observation_and_product_variances() {
        let sigma2 = 0.3;
        let draws = 100_000;
        let mut bank = NoiseBank::new(11, 0, 2, 1);
        let (t1, tm) = (0.7, -2.1);
        let (h1, hm) = (Complex64::cis(t1), Complex64::cis(tm));
        let mut var_entry = 0.0;
        let mut prod = Vec::with_capacity(draws);
        for _ in 0..draws {
            let o1 = noisy_entry(t1, bank.draw(0, 0, sigma2));
            let om = noisy_entry(tm, bank.draw(1, 0, sigma2));
            var_entry += (o1 - h1).norm_sqr();
            prod.push(o1.conj() * om);
        }
        var_entry /= draws as f64;
        let truth = h1.conj() * hm;
        let var_prod = prod.iter().map(|p| (p - truth).norm_sqr()).sum::<f64>() / draws as f64;
        assert!((var_entry / sigma2 - 1.0).abs() < 0.03, "{var_entry}");
        let target = sigma2 * sigma2 + 2.0 * sigma2;
        assert!((var_prod / target - 1.0).abs() < 0.03, "{var_prod}");
    }

    #[test]
    fn validation_rejects_large_offset() {
        let mut p = LinkParams::new(30e9, 20e9, 1);
        assert!(p.validate().is_ok());
        p.freq_offset_down[0] = 3e7;
        assert!(p.validate().is_ok());
        p.freq_offset_down[0] = -3.1e7;
        assert!(p.validate().is_err());
        p.freq_offset_down[0] = 0.0;
        p.est_noise_var = -1.0;
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn phase_entries_have_unit_modulus(r in 1e5f64..5e6, t in 0.0f64..100.0, a in -PI..PI) {
            let mut p = LinkParams::new(30e9, 20e9, 1);
            p.phase_offset_down[0] = a;
            p.freq_offset_down[0] = 1e4;
            let ranges = DMatrix::from_element(2, 1, r);
            let snap = ChannelSnapshot::from_ranges(&p, &ranges, t);
            for h in snap.h_down().iter().chain(snap.h_up().iter()).chain(snap.h_down_diff().iter()) {
                prop_assert!((h.norm() - 1.0).abs() < 1e-14);
            }
        }
    }
}
