//! Deterministic, order-independent random streams.
//!
//! Every consumer gets its own ChaCha8 stream keyed by `(master seed, trial)`
//! and selected by a stream id, so Monte-Carlo results never depend on the
//! order in which trials are scheduled.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// SplitMix64 finaliser, used to decorrelate adjacent seeds.
pub fn mix(master: u64, trial: u64) -> u64 {
    let mut z = master ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for one `(trial, stream id)` pair.
pub fn stream(master: u64, trial: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(master, trial));
    rng.set_stream(id);
    rng
}

/// Stream id of the noise process on link `(m, sat)`.
pub fn link_stream_id(m: usize, sat: usize, num_satellites: usize) -> u64 {
    (m * num_satellites + sat) as u64
}

/// Circularly-symmetric complex Gaussian with `E|z|² = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}
