//! Seeded random streams.
//!
//! Every stochastic routine draws from ChaCha8 keyed by a 64-bit seed and
//! positioned on an explicit 64-bit stream index. ChaCha is counter based, so
//! the same `(seed, stream)` pair yields the same sequence on every platform,
//! and workers that use disjoint stream indices never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes several integers into one seed (splitmix64 finalizer per word).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut acc = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        let mut z = acc ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        acc = z ^ (z >> 31);
    }
    acc
}
