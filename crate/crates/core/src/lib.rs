//! Pseudo channel reciprocity for FDD LEO satellite links.
//!
//! The uplink channel phase of a fixed multi-antenna terminal is inferred
//! from downlink phase observations scaled by the carrier ratio, either
//! sample by sample ([`tracking::NaiveTracker`]) or through first-order
//! phase-locked loops ([`tracking::Dpll`], [`tracking::DifferentialTracker`]).
//! The tracked phases drive a zero-forcing uplink precoder
//! ([`precoding::zf_precoder`]), and [`analysis`] gives the closed-form
//! lock-loss and loop-gain results that the Monte-Carlo [`harness`] checks.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod precoding;
pub mod rng;
pub mod tracking;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
