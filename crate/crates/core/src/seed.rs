//! Seed derivation and portable sampling helpers.
//!
//! All randomness flows through ChaCha8 streams seeded from a base seed mixed
//! with a per-unit key, so results do not depend on scheduling order or on
//! the platform's pointer width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `parts` into `base`; order matters.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Stable 64-bit key for a string (FNV-1a).
pub fn string_key(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn rng(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform index in `0..n` drawn as a u64 so it is identical on every target.
pub fn index(rng: &mut StreamRng, n: usize) -> usize {
    rng.random_range(0..n as u64) as usize
}

/// Fisher-Yates shuffle with width-independent index draws.
pub fn shuffle<T>(rng: &mut StreamRng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        items.swap(i, j);
    }
}
