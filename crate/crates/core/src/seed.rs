//! Seed derivation and the generator used everywhere randomness is needed.
//!
//! All streams are ChaCha8 (`rand_chacha`), seeded from a 64-bit value. Child
//! seeds are derived by folding tags into the parent with the SplitMix64
//! finalizer, so a stream depends only on its (parent, tags) path and never on
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold `tags` into `seed`: `h = mix64(seed)`, then `h = mix64(h ^ tag)` per tag.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(seed), |h, &t| mix64(h ^ t))
}

/// Stable 64-bit tag for a short label (FNV-1a).
pub fn label(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn rng_for(seed: u64, tags: &[u64]) -> Rng {
    rng(derive(seed, tags))
}
