//! Seed derivation so every stochastic component draws from its own stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for a base seed combined with any number of stream labels.
pub fn stream(seed: u64, labels: &[u64]) -> Rng {
    let s = labels.iter().fold(mix(seed), |acc, l| mix(acc ^ mix(*l)));
    ChaCha8Rng::seed_from_u64(s)
}
