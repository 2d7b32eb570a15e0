//! Zero-forcing and matched-filter uplink precoding.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelSnapshot;
use crate::error::{Error, Result};

/// Default condition-number limit of `HᵀH*` above which ZF is refused.
pub const DEFAULT_COND_LIMIT: f64 = 1e8;

/// ZF precoder together with the quantities it was derived from.
#[derive(Debug, Clone)]
pub struct ZfPrecoder {
    /// `T = H*(HᵀH*)⁻¹ / sqrt(Tr[(HᵀH*)⁻¹])`, `M × L`.
    pub matrix: DMatrix<Complex64>,
    /// `Tr[(HᵀH*)⁻¹]`.
    pub trace_inverse: f64,
    /// 2-norm condition number of `HᵀH*`.
    pub condition_number: f64,
}

pub fn zf_precoder(h: &DMatrix<Complex64>) -> Result<ZfPrecoder> {
    zf_precoder_with_limit(h, DEFAULT_COND_LIMIT)
}

/// Builds the ZF precoder for phase matrix `h` (`M × L`, `L ≤ M`).
///
/// The Gram matrix is factored once by SVD; its inverse is the solution
/// against the identity and its condition number comes from the same
/// singular values.
pub fn zf_precoder_with_limit(h: &DMatrix<Complex64>, cond_limit: f64) -> Result<ZfPrecoder> {
    let (m, l) = h.shape();
    if l == 0 || l > m {
        return Err(Error::invalid(format!("ZF needs 1 ≤ L ≤ M, got M={m}, L={l}")));
    }
    let h_conj = h.map(|z| z.conj());
    let gram = h.transpose() * &h_conj;
    let svd = gram.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let cond = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !(cond <= cond_limit) {
        return Err(Error::SingularChannel { cond });
    }
    let inv = svd
        .solve(&DMatrix::<Complex64>::identity(l, l), 0.0)
        .map_err(|e| Error::invalid(e.to_string()))?;
    let trace = inv.trace().re;
    let matrix = (h_conj * inv) / Complex64::from(trace.sqrt());
    Ok(ZfPrecoder {
        matrix,
        trace_inverse: trace,
        condition_number: cond,
    })
}

/// `√p·h*/‖h‖`: single-stream matched-filter precoder with squared norm `p`.
pub fn mrc_precoder(h_col: &DVector<Complex64>, power_fraction: f64) -> Result<DVector<Complex64>> {
    if !(power_fraction > 0.0 && power_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "power fraction must lie in (0, 1], got {power_fraction}"
        )));
    }
    let norm = h_col.norm();
    if norm == 0.0 {
        return Err(Error::invalid("MRC needs a non-zero channel"));
    }
    Ok(h_col.map(|z| z.conj()) * Complex64::from(power_fraction.sqrt() / norm))
}

/// Received samples `y = (H̃^U)ᵀ·T·s + n` at the `L` satellites.
pub fn apply_uplink(
    precoder: &DMatrix<Complex64>,
    symbols: &DVector<Complex64>,
    snapshot: &ChannelSnapshot,
    noise: &DVector<Complex64>,
) -> DVector<Complex64> {
    snapshot.full_up().transpose() * precoder * symbols + noise
}

/// Power scalars turning the normalised composite channel into SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    /// Total transmit power, W.
    pub tx_power_w: f64,
    /// Receiver noise power `N₀·B`, W.
    pub noise_power_w: f64,
}

#[derive(Debug, Clone)]
pub struct PrecodingResult {
    pub precoder: DMatrix<Complex64>,
    pub signal_power: Vec<f64>,
    pub interference_power: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub sinr_db: Vec<f64>,
    pub condition_number: f64,
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Per-satellite powers through the true composite channel `D^U·Hᵀ·T`.
pub fn post_precoding_sinr(precoder: &ZfPrecoder, snapshot: &ChannelSnapshot, budget: &PowerBudget) -> PrecodingResult {
    let composite = snapshot.full_up().transpose() * &precoder.matrix;
    let l = composite.nrows();
    let mut signal = Vec::with_capacity(l);
    let mut interference = Vec::with_capacity(l);
    let mut snr = Vec::with_capacity(l);
    let mut sinr = Vec::with_capacity(l);
    for i in 0..l {
        let s = budget.tx_power_w * composite[(i, i)].norm_sqr();
        let x: f64 = (0..composite.ncols())
            .filter(|&k| k != i)
            .map(|k| budget.tx_power_w * composite[(i, k)].norm_sqr())
            .sum();
        signal.push(s);
        interference.push(x);
        snr.push(to_db(s / budget.noise_power_w));
        sinr.push(to_db(s / (x + budget.noise_power_w)));
    }
    PrecodingResult {
        precoder: precoder.matrix.clone(),
        signal_power: signal,
        interference_power: interference,
        snr_db: snr,
        sinr_db: sinr,
        condition_number: precoder.condition_number,
    }
}

/// SNR (dB) at satellite `sat` when the whole array serves it alone with an
/// MRC precoder built from `csit_col`.
pub fn mrc_snr_db(
    csit_col: &DVector<Complex64>,
    snapshot: &ChannelSnapshot,
    sat: usize,
    power_fraction: f64,
    budget: &PowerBudget,
) -> Result<f64> {
    let w = mrc_precoder(csit_col, power_fraction)?;
    let h = snapshot.full_up().column(sat).into_owned();
    let gain = h.transpose() * w;
    Ok(to_db(budget.tx_power_w * gain[0].norm_sqr() / budget.noise_power_w))
}
