//! Closed-form loop analytics: lock-loss prediction, steady-state error,
//! loop-gain selection and phase-increment bounds.
//!
//! Noise variances here are per-sample variances of the complex downlink
//! estimate. The first-order loop with gain `K` and period `T` corrects its
//! phase by `K·T` times the detector output, so `K·T` appears wherever a
//! continuous-time analysis would carry `K`.

pub mod bessel;

use std::f64::consts::PI;

pub use bessel::{bessel_i0, log_i0};

use crate::error::{Error, Result};
use crate::geometry::{orbital_period, ArrayConfig, OrbitConfig};
use crate::SPEED_OF_LIGHT;

/// Parameters of a first-order loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopParams {
    /// Loop gain `K`, 1/(rad·s).
    pub gain: f64,
    /// Sample period `T`, s.
    pub period: f64,
    /// Signal amplitude at the detector input.
    pub amplitude: f64,
    /// Observation noise variance `σ²`.
    pub sigma2: f64,
    /// Residual Doppler `f_d`, rad/s.
    pub doppler: f64,
}

impl LoopParams {
    /// `x = K·A·T`.
    pub fn kat(&self) -> f64 {
        self.gain * self.amplitude * self.period
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.period > 0.0 && self.amplitude > 0.0) {
            return Err(Error::invalid("K, T and A must be positive"));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(Error::invalid("noise variance must be non-negative"));
        }
        let x = self.kat();
        if !(x > 0.0 && x < 2.0) {
            return Err(Error::StabilityViolation { kat: x });
        }
        Ok(())
    }

    fn with_sigma2(self, sigma2: f64) -> Self {
        Self { sigma2, ..self }
    }
}

/// Predicted mean number of samples before the first cycle slip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MslPrediction {
    pub mean_samples: f64,
    pub mean_time_s: f64,
    pub effective_snr: f64,
    /// `ln(mean_samples)`, finite even when `mean_samples` overflows.
    pub ln_mean_samples: f64,
}

impl MslPrediction {
    pub fn log10_mean_samples(&self) -> f64 {
        self.ln_mean_samples / std::f64::consts::LN_10
    }
}

/// `α = 4A / (K·T·σ²)`; infinite for a noiseless loop.
pub fn effective_snr(p: &LoopParams) -> f64 {
    if p.sigma2 == 0.0 {
        return f64::INFINITY;
    }
    4.0 * p.amplitude / (p.gain * p.period * p.sigma2)
}

/// `N ≈ 8π² / (σ²·K²·T²) · I₀²(α)`, evaluated in the log domain.
pub fn msl_samples(p: &LoopParams) -> MslPrediction {
    let alpha = effective_snr(p);
    let kt = p.gain * p.period;
    let ln_n = if alpha.is_infinite() {
        f64::INFINITY
    } else {
        (8.0 * PI * PI).ln() - (p.sigma2 * kt * kt).ln() + 2.0 * log_i0(alpha)
    };
    let mean_samples = ln_n.exp();
    MslPrediction {
        mean_samples,
        mean_time_s: mean_samples * p.period,
        effective_snr: alpha,
        ln_mean_samples: ln_n,
    }
}

/// Noise variance of the raw conjugate product of two independent
/// estimates: `σ⁴ + 2σ²`.
pub fn differential_variance(sigma2: f64) -> f64 {
    sigma2 * sigma2 + 2.0 * sigma2
}

/// [`msl_samples`] with `σ²` replaced by `σ⁴ + 2σ²`.
pub fn msl_samples_differential(p: &LoopParams) -> MslPrediction {
    msl_samples(&p.with_sigma2(differential_variance(p.sigma2)))
}

/// A cycle slip is an unwrapped error of at least π in magnitude.
pub fn detect_cycle_slip(phi_unwrapped: f64) -> bool {
    phi_unwrapped.abs() >= PI
}

/// `σ²x / (A²(2 − x)) + T²f_d² / x²` with `x = K·A·T`.
pub fn steady_state_mse(p: &LoopParams) -> Result<f64> {
    let x = p.kat();
    if !(x > 0.0 && x < 2.0) {
        return Err(Error::StabilityViolation { kat: x });
    }
    let a2 = p.amplitude * p.amplitude;
    let lag = p.period * p.doppler / x;
    Ok(p.sigma2 * x / (a2 * (2.0 - x)) + lag * lag)
}

/// Gain chosen by [`optimal_gain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainChoice {
    pub gain: f64,
    /// `K·A·T` of the chosen gain.
    pub kat: f64,
    /// Set when the optimum degenerates to `x → 0` and the floor was used.
    pub floored: bool,
}

/// `K·A·T` returned when there is no Doppler to track.
pub const DEFAULT_KAT_FLOOR: f64 = 1e-6;

/// Gain minimising [`steady_state_mse`].
///
/// Setting the derivative of the MSE in `x = KAT` to zero gives
/// `γx³ = a(2 − x)²`, i.e. `γx³ − a x² + 4a x − 4a = 0`, with
/// `γ = σ²/A²` and `a = (T f_d)²`. The left side minus the right is strictly
/// increasing on `(0, 2)`, so the root is unique and found by bisection.
pub fn optimal_gain(amplitude: f64, period: f64, sigma2: f64, doppler: f64) -> Result<GainChoice> {
    optimal_gain_with_floor(amplitude, period, sigma2, doppler, DEFAULT_KAT_FLOOR)
}

pub fn optimal_gain_with_floor(
    amplitude: f64,
    period: f64,
    sigma2: f64,
    doppler: f64,
    kat_floor: f64,
) -> Result<GainChoice> {
    if !(amplitude > 0.0 && period > 0.0) {
        return Err(Error::invalid("A and T must be positive"));
    }
    if !(sigma2 >= 0.0 && doppler >= 0.0) {
        return Err(Error::invalid("σ² and f_d must be non-negative"));
    }
    let to_gain = |x: f64| x / (amplitude * period);
    if doppler == 0.0 {
        return Ok(GainChoice {
            gain: to_gain(kat_floor),
            kat: kat_floor,
            floored: true,
        });
    }
    let gamma = sigma2 / (amplitude * amplitude);
    let a = (period * doppler).powi(2);
    let f = |x: f64| gamma * x * x * x - a * (2.0 - x) * (2.0 - x);
    if !(f(2.0) > 0.0) {
        return Err(Error::NoRootInRange);
    }
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    if !(x > 0.0 && x < 2.0) {
        return Err(Error::NoRootInRange);
    }
    Ok(GainChoice {
        gain: to_gain(x),
        kat: x,
        floored: false,
    })
}

/// Largest per-sample downlink phase increment, `2πf_c · 2πTR/(c·T_o)`.
pub fn increment_bound(orbit: &OrbitConfig, f_c: f64, period: f64) -> f64 {
    2.0 * PI * f_c * 2.0 * PI * period * orbit.radius() / (SPEED_OF_LIGHT * orbital_period(orbit))
}

/// Largest per-sample differential uplink phase increment,
/// `4π·d·f_c^U·v·T/(c·h)`, with `d` the longest baseline to the reference
/// antenna.
pub fn differential_increment_bound(orbit: &OrbitConfig, array: &ArrayConfig, f_c_up: f64, period: f64) -> f64 {
    let baseline = array.spacing_m * array.num_antennas.saturating_sub(1) as f64;
    4.0 * PI * baseline * f_c_up * orbit.speed() * period / (SPEED_OF_LIGHT * orbit.altitude_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lp(gain: f64, period: f64, amplitude: f64, sigma2: f64, doppler: f64) -> LoopParams {
        LoopParams {
            gain,
            period,
            amplitude,
            sigma2,
            doppler,
        }
    }

    #[test]
    fn effective_snr_examples() {
        assert_eq!(effective_snr(&lp(4.0, 1.0, 1.0, 1.0, 0.0)), 1.0);
        assert!((effective_snr(&lp(1.0, 1.0, 1.0, 0.1, 0.0)) - 40.0).abs() < 1e-12);
        let a = effective_snr(&lp(2.0, 1e-3, 1.0, 0.3, 0.0));
        let b = effective_snr(&lp(1.0, 1e-3, 1.0, 0.3, 0.0));
        assert!((b / a - 2.0).abs() < 1e-14);
        assert!(effective_snr(&lp(1.0, 1.0, 1.0, 0.0, 0.0)).is_infinite());
    }

    #[test]
    fn msl_reference_value() {
        let p = msl_samples(&lp(4.0, 1.0, 1.0, 1.0, 0.0));
        // 8π²/16 · I₀(1)²
        assert!((p.mean_samples - 7.910_106_994_339_189).abs() < 1e-12);
        assert_eq!(p.mean_time_s, p.mean_samples * 1.0);
    }

    #[test]
    fn msl_small_amplitude_limit() {
        let p = lp(3.0, 0.5, 1e-12, 2.0, 0.0);
        let got = msl_samples(&p).mean_samples;
        let limit = 8.0 * PI * PI / (2.0 * 9.0 * 0.25);
        assert!((got / limit - 1.0).abs() < 1e-10);
    }

    #[test]
    fn msl_log_domain_for_huge_alpha() {
        let p = msl_samples(&lp(10.0, 1e-3, 1.0, 1e-4, 0.0));
        assert!(p.effective_snr > 700.0);
        assert!(p.mean_samples.is_infinite());
        assert!(p.ln_mean_samples.is_finite());
        assert!(p.log10_mean_samples() > 1000.0);
    }

    #[test]
    fn differential_variance_examples() {
        assert_eq!(differential_variance(1.0), 3.0);
        assert!((differential_variance(0.1) - 0.21).abs() < 1e-15);
        let p = lp(1e3, 1e-3, 1.0, 0.5, 0.0);
        assert!(msl_samples_differential(&p).mean_samples < msl_samples(&p).mean_samples);
        let q = p.with_sigma2(3.0);
        let r = lp(1e3, 1e-3, 1.0, 1.0, 0.0);
        assert_eq!(msl_samples(&q), msl_samples_differential(&r));
    }

    #[test]
    fn slip_predicate() {
        assert!(!detect_cycle_slip(3.0));
        assert!(detect_cycle_slip(PI));
        assert!(detect_cycle_slip(-3.2));
    }

    #[test]
    fn mse_terms() {
        let noise_only = steady_state_mse(&lp(100.0, 1e-3, 1.0, 0.2, 0.0)).unwrap();
        assert!((noise_only - 0.2 * 0.1 / 1.9).abs() < 1e-15);
        let tiny = steady_state_mse(&lp(1e-6, 1e-3, 1.0, 0.2, 0.0)).unwrap();
        assert!(tiny < 1e-9);
        let lag1 = steady_state_mse(&lp(100.0, 1e-3, 1.0, 0.0, 50.0)).unwrap();
        let lag2 = steady_state_mse(&lp(200.0, 1e-3, 1.0, 0.0, 50.0)).unwrap();
        assert!((lag1 - (1e-3 * 50.0 / 0.1f64).powi(2)).abs() < 1e-15);
        assert!(lag2 < lag1);
        assert!(matches!(
            steady_state_mse(&lp(2000.0, 1e-3, 1.0, 0.1, 0.0)),
            Err(Error::StabilityViolation { .. })
        ));
    }

    #[test]
    fn mse_diverges_at_stability_edge() {
        let at = |x: f64| steady_state_mse(&lp(x, 1.0, 1.0, 0.1, 0.0)).unwrap();
        assert!(at(1.999_999) > 1e4 * at(1.0));
    }

    /// Linearised loop `φ ← (1 − x)φ + T f_d − K T w`, `Var w = σ²`.
    #[test]
    fn mse_matches_linearised_recursion() {
        use crate::rng;
        use rand_distr::{Distribution, Normal};
        let p = lp(400.0, 1e-3, 1.0, 0.05, 20.0);
        let x = p.kat();
        let kt = p.gain * p.period;
        let w = Normal::new(0.0, p.sigma2.sqrt()).unwrap();
        let mut r = rng::stream(5, 0, 0);
        let mut phi = p.period * p.doppler / x;
        let (burn, n) = (1_000, 400_000);
        let mut acc = 0.0;
        for i in 0..burn + n {
            phi = (1.0 - x) * phi + p.period * p.doppler - kt * w.sample(&mut r);
            if i >= burn {
                acc += phi * phi;
            }
        }
        let empirical = acc / n as f64;
        let predicted = steady_state_mse(&p).unwrap();
        assert!((empirical / predicted - 1.0).abs() < 0.1, "{empirical} vs {predicted}");
    }

    #[test]
    fn gain_floor_without_doppler() {
        let g = optimal_gain(1.0, 1e-4, 0.01, 0.0).unwrap();
        assert!(g.floored);
        assert!((g.kat - DEFAULT_KAT_FLOOR).abs() < 1e-18);
        assert!(matches!(optimal_gain(1.0, 1e-4, 0.0, 100.0), Err(Error::NoRootInRange)));
    }

    #[test]
    fn gain_matches_grid_search() {
        let (a, t, s2, fd) = (1.0, 1e-4, 0.01, 100.0);
        let g = optimal_gain(a, t, s2, fd).unwrap();
        let mse = |x: f64| steady_state_mse(&lp(x / (a * t), t, a, s2, fd)).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        let mut x = 1e-5;
        while x < 2.0 {
            let v = mse(x);
            if v < best.0 {
                best = (v, x);
            }
            x += 1e-5;
        }
        assert!((g.kat - best.1).abs() / g.kat < 1e-4, "{} vs {}", g.kat, best.1);
    }

    #[test]
    fn gain_is_a_stationary_minimum() {
        let (a, t, s2, fd) = (0.7, 1e-3, 0.2, 300.0);
        let g = optimal_gain(a, t, s2, fd).unwrap();
        let mse = |k: f64| steady_state_mse(&lp(k, t, a, s2, fd)).unwrap();
        let h = 1e-4 * g.gain;
        let d1 = (mse(g.gain + h) - mse(g.gain - h)) / (2.0 * h);
        let d2 = mse(g.gain + h) - 2.0 * mse(g.gain) + mse(g.gain - h);
        assert!((d1 * g.gain / mse(g.gain)).abs() < 1e-6);
        assert!(d2 > 0.0);
    }

    #[test]
    fn increment_bound_reference() {
        let orbit = OrbitConfig::with_altitude(1.0e6);
        let b = increment_bound(&orbit, 30e9, 1e-7);
        assert!((b - 0.46).abs() / 0.46 < 0.01, "{b}");
        assert!((b - 0.462_366_225_269_790_04).abs() < 1e-12);
        assert!((increment_bound(&orbit, 30e9, 0.5e-7) - 0.5 * b).abs() < 1e-15);
    }

    #[test]
    fn differential_bound_reference() {
        let orbit = OrbitConfig::with_altitude(1.0e6);
        let b = differential_increment_bound(&orbit, &ArrayConfig::new(2, 0.5), 20e9, 0.1);
        assert!((b - 0.308_244_150_179_860_07).abs() < 1e-12, "{b}");
        assert!(b < PI);
        assert_eq!(differential_increment_bound(&orbit, &ArrayConfig::new(1, 0.5), 20e9, 0.1), 0.0);
    }

    proptest! {
        #[test]
        fn slip_predicate_symmetric(phi in -10.0f64..10.0) {
            prop_assert_eq!(detect_cycle_slip(phi), detect_cycle_slip(-phi));
        }

        #[test]
        fn msl_depends_on_alpha_and_prefactor_only(
            k in 1.0f64..1e4, t in 1e-6f64..1e-2, a in 0.1f64..2.0, s2 in 0.01f64..2.0, c in 0.2f64..5.0,
        ) {
            // scale K by c and T by 1/c: K·T, α and σ²K²T² are unchanged
            let p = lp(k, t, a, s2, 0.0);
            let q = lp(k * c, t / c, a, s2, 0.0);
            let (np, nq) = (msl_samples(&p), msl_samples(&q));
            prop_assert!((np.ln_mean_samples - nq.ln_mean_samples).abs() < 1e-9);
        }

        #[test]
        fn msl_increases_with_alpha(kt in 1e-3f64..1.0, s2 in 0.01f64..2.0, a1 in 0.1f64..3.0, da in 0.01f64..1.0) {
            // raising A at fixed σ²K²T² raises α only
            let lo = msl_samples(&lp(kt, 1.0, a1, s2, 0.0));
            let hi = msl_samples(&lp(kt, 1.0, a1 + da, s2, 0.0));
            prop_assert!(hi.ln_mean_samples > lo.ln_mean_samples);
        }

        #[test]
        fn optimal_gain_in_stability_region(
            a in 0.1f64..3.0, t in 1e-7f64..1e-1, s2 in 1e-4f64..3.0, fd_t in 1e-4f64..0.5,
        ) {
            let g = optimal_gain(a, t, s2, fd_t / t).unwrap();
            prop_assert!(g.kat > 0.0 && g.kat < 2.0);
            let gamma = s2 / (a * a);
            let aa = fd_t * fd_t;
            let x = g.kat;
            let resid = gamma * x.powi(3) - aa * x * x + 4.0 * aa * x - 4.0 * aa;
            prop_assert!(resid.abs() <= 1e-9 * (gamma * x.powi(3)).max(4.0 * aa));
        }
    }
}
