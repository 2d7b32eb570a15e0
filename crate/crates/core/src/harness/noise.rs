//! Empirical checks of the estimation-noise variances seen by the trackers.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::analysis::differential_variance;
use crate::channel::noisy_entry;
use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, stream};

/// Fine-grid substeps per filter length in the sampled-boxcar check.
const SUBSTEPS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceCheck {
    pub quantity: String,
    pub sigma2: f64,
    pub expected: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub within: bool,
}

impl VarianceCheck {
    fn from_squares(quantity: &str, sigma2: f64, expected: f64, squares: &[f64]) -> Self {
        let n = squares.len() as f64;
        let mean = squares.iter().sum::<f64>() / n;
        let var = squares.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std_error = (var / n).sqrt();
        Self {
            quantity: quantity.to_owned(),
            sigma2,
            expected,
            empirical: mean,
            std_error,
            within: (mean - expected).abs() <= 3.0 * std_error,
        }
    }

    pub fn z_score(&self) -> f64 {
        if self.std_error == 0.0 {
            return 0.0;
        }
        (self.empirical - self.expected) / self.std_error
    }
}

/// Compares sample second moments against their closed forms:
///
/// * `entry`: `|ĥ − h|²`, expected `σ²`;
/// * `detector`: quadrature detector noise `Im(ĥ·e^{−jθ})²`, expected `σ²/2`;
/// * `product`: `|ĥ_0^*ĥ_1 − h_0^*h_1|²`, expected `σ⁴ + 2σ²`;
/// * `sampled_boxcar`: white noise of PSD `σ²/2` through the filter
///   `W·1[−1/(2W), 1/(2W)]`, sampled every `M/W`; expected `σ²W/2`.
pub fn noise_identity_check(sigma2: f64, draws: usize, bandwidth_hz: f64, seed: u64) -> Result<Vec<VarianceCheck>> {
    if draws < 2 {
        return Err(Error::invalid("at least two draws are needed"));
    }
    if !(sigma2 >= 0.0 && bandwidth_hz > 0.0) {
        return Err(Error::invalid("σ² must be non-negative and the bandwidth positive"));
    }
    let mut rng = stream(seed, 0, 0);
    let mut entry = Vec::with_capacity(draws);
    let mut detector = Vec::with_capacity(draws);
    let mut product = Vec::with_capacity(draws);
    for _ in 0..draws {
        let theta0: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let theta1: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let h0 = num_complex::Complex64::cis(theta0);
        let h1 = num_complex::Complex64::cis(theta1);
        let e0 = noisy_entry(theta0, complex_gaussian(&mut rng, sigma2));
        let e1 = noisy_entry(theta1, complex_gaussian(&mut rng, sigma2));
        entry.push((e0 - h0).norm_sqr());
        detector.push((e0 * h0.conj()).im.powi(2));
        product.push((e0.conj() * e1 - h0.conj() * h1).norm_sqr());
    }

    // Fine-grid white noise: variance (σ²/2)/dt per substep.
    let dt = 1.0 / (bandwidth_hz * SUBSTEPS as f64);
    let sd = (0.5 * sigma2 / dt).sqrt();
    let boxcar: Vec<f64> = (0..draws)
        .map(|_| {
            let acc: f64 = (0..SUBSTEPS)
                .map(|_| {
                    let g: f64 = rng.sample(StandardNormal);
                    sd * g
                })
                .sum();
            (bandwidth_hz * dt * acc).powi(2)
        })
        .collect();

    Ok(vec![
        VarianceCheck::from_squares("entry", sigma2, sigma2, &entry),
        VarianceCheck::from_squares("detector", sigma2, 0.5 * sigma2, &detector),
        VarianceCheck::from_squares("product", sigma2, differential_variance(sigma2), &product),
        VarianceCheck::from_squares("sampled_boxcar", sigma2, 0.5 * sigma2 * bandwidth_hz, &boxcar),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_exact() {
        for c in noise_identity_check(0.0, 1000, 1.0, 1).unwrap() {
            assert!(c.empirical.abs() < 1e-24 && c.within, "{c:?}");
        }
    }

    #[test]
    fn expected_values_by_substitution() {
        let c = noise_identity_check(0.1, 100, 2.0, 1).unwrap();
        assert!((c[2].expected - 0.21).abs() < 1e-15);
        assert!((c[3].expected - 0.1).abs() < 1e-15);
        let c = noise_identity_check(1.0, 100, 1.0, 1).unwrap();
        assert_eq!(c[2].expected, 3.0);
    }

    #[test]
    fn rejects_too_few_draws() {
        assert!(noise_identity_check(1.0, 1, 1.0, 0).is_err());
    }
}
