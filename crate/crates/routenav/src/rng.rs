//! Deterministic stream derivation.
//!
//! Every stochastic component in the crate draws from a [`ChaCha8Rng`] whose
//! seed is derived from a run seed plus a stream label, so that independent
//! streams (per env slot, per episode, per trial) never interleave and runs
//! replay bit-identically.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates nearby seed inputs.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combine a base seed with labelled stream components into a derived seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut acc = mix64(base);
    for &p in parts {
        acc = mix64(acc ^ p.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    acc
}

/// Deterministic RNG for the given derived stream.
pub fn stream_rng(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}

/// Stream labels, kept in one place so call sites cannot collide by accident.
pub mod label {
    pub const WALK: u64 = 1;
    pub const DISTORTION: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const IMAGE: u64 = 4;
    pub const ENV_SLOT: u64 = 5;
    pub const PARAM_INIT: u64 = 6;
    pub const SHUFFLE: u64 = 7;
    pub const TRIAL: u64 = 8;
    pub const DEPLOY: u64 = 9;
}
