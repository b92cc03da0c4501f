//! Seeded randomness helpers.
//!
//! Sequential samplers use ChaCha8 seeded from a `u64`. The spiking engine uses
//! counter-based draws instead: every (seed, sample, step, element) tuple maps to
//! one uniform variate, so a fault that leaves a spike unchanged also leaves every
//! random decision downstream of it unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent child seed for a labelled sub-stream.
pub fn derive(seed: u64, stream: u64) -> u64 {
    mix(seed ^ mix(stream.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform variate in [0, 1) addressed by a 4-component counter.
#[inline]
pub fn uniform_at(key: u64, a: u64, b: u64, c: u64) -> f64 {
    let h = mix(mix(mix(key ^ a).wrapping_add(b)) ^ c.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
