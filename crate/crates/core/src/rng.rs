//! Seed derivation. Every random stream is a ChaCha8 generator seeded from a
//! `u64`, so a seed fully determines the stream across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for `(stream, index)` under `base`.
///
/// For a fixed base, distinct `(stream, index)` pairs with both parts below
/// 2^32 always map to distinct seeds: the packing is injective, xor with the
/// base is a bijection and so is the finalizer.
pub fn stable_mix(base: u64, stream: u32, index: u32) -> u64 {
    let packed = (u64::from(stream) << 32) | u64::from(index);
    splitmix64(splitmix64(base) ^ packed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;
    use std::collections::HashSet;

    #[test]
    fn derived_seeds_do_not_collide() {
        let mut seen = HashSet::new();
        for stream in 0..4 {
            for t in 0..25_000 {
                assert!(seen.insert(stable_mix(42, stream, t)));
            }
        }
        assert_eq!(seen.len(), 100_000);
    }

    #[test]
    fn stream_is_stable_per_seed() {
        let a: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(from_seed(7), |r, _| Some(r.next_u64()))
            .collect();
        let b: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(from_seed(7), |r, _| Some(r.next_u64()))
            .collect();
        assert_eq!(a, b);
        assert_ne!(stable_mix(1, 0, 0), stable_mix(2, 0, 0));
    }
}
