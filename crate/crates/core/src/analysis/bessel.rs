//! Modified Bessel function of the first kind, order zero.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Below this argument the power series is used, above it the asymptotic
/// expansion.
pub const CROSSOVER: f64 = 15.0;

/// `Σ (x/2)^{2k} / (k!)²`.
pub fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < 1e-17 * sum {
            return sum;
        }
        k += 1.0;
    }
}

/// Correction series `Σ c_k / x^k` of `I₀(x) ~ e^x/√(2πx)·Σ c_k/x^k`, with
/// `c_k = ((2k−1)!!)² / (k!·8^k)`, truncated at its smallest term.
fn asymptotic_correction(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
        if next >= term || next < 1e-17 * sum {
            return sum;
        }
        term = next;
        sum += term;
        k += 1.0;
    }
}

pub fn i0_asymptotic(x: f64) -> f64 {
    x.exp() / (2.0 * PI * x).sqrt() * asymptotic_correction(x)
}

/// `ln I₀(x)` for `x ≥ 0`; finite for every finite `x`.
pub fn log_i0(x: f64) -> f64 {
    let x = x.abs();
    if x < CROSSOVER {
        i0_series(x).ln()
    } else {
        x - 0.5 * (2.0 * PI * x).ln() + asymptotic_correction(x).ln()
    }
}

/// `I₀(x)`; fails with [`Error::Overflow`] when the value exceeds `f64`.
pub fn bessel_i0(x: f64) -> Result<f64> {
    let x = x.abs();
    if x < CROSSOVER {
        return Ok(i0_series(x));
    }
    let v = log_i0(x).exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("I0({x})")))
    }
}
