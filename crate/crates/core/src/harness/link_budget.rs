//! Free-space link budget and its mapping to per-sample noise variance.

use std::f64::consts::PI;

use crate::precoding::PowerBudget;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// `σ² = 1/SNR`.
pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
    db_to_linear(-snr_db)
}

/// Free-space path loss `20·log10(4πrf/c)`, dB.
pub fn free_space_path_loss_db(range_m: f64, f_c: f64) -> f64 {
    20.0 * (4.0 * PI * range_m * f_c / SPEED_OF_LIGHT).log10()
}

impl LinkBudget {
    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }

    pub fn snr_db(&self, range_m: f64, f_c: f64) -> f64 {
        self.tx_power_dbm + self.tx_gain_dbi + self.rx_gain_dbi
            - free_space_path_loss_db(range_m, f_c)
            - self.noise_power_dbm()
    }

    /// Per-estimate noise variance `1/SNR` at range `range_m`.
    pub fn link_budget_sigma(&self, range_m: f64, f_c: f64) -> f64 {
        sigma2_from_snr_db(self.snr_db(range_m, f_c))
    }

    /// Amplitude constant `Υ = sqrt(G_t·G_r)·λ/(4π)`, so that `(Υ/r)²` is the
    /// Friis power gain at range `r`.
    pub fn gain_constant(&self, f_c: f64) -> f64 {
        let g = db_to_linear(self.tx_gain_dbi + self.rx_gain_dbi);
        g.sqrt() * SPEED_OF_LIGHT / (f_c * 4.0 * PI)
    }

    pub fn power_budget(&self) -> PowerBudget {
        PowerBudget {
            tx_power_w: dbm_to_watts(self.tx_power_dbm),
            noise_power_w: dbm_to_watts(self.noise_power_dbm()),
        }
    }
}
