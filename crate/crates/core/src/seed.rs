//! Seed derivation. Every stochastic stage draws from a ChaCha stream whose
//! seed is derived from a named base seed plus stage-specific coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine a base seed with a sequence of coordinates (epoch, step, ...).
pub fn derive(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix(base), |acc, &c| mix(acc ^ mix(c)))
}

/// Stable 64-bit FNV-1a hash of a string, used to key seeds by id.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
