//! Seeded random streams.
//!
//! All randomness flows through [`SeededRng`] (ChaCha8). Independent streams
//! for grid cells, trials and pipeline stages are derived from a base seed by
//! [`derive_seed`], so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of stream identifiers.
///
/// `derive_seed(base, &[i, j, t])` is `base ^ h(i, j, t)` with `h` a fixed
/// SplitMix64 chain, stable across platforms and releases.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let h = path.iter().fold(0x5EED_0F5E_ED5E_ED00u64, |acc, &x| {
        splitmix64(acc ^ splitmix64(x))
    });
    base ^ h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_streams_are_distinct_and_stable() {
        let a = derive_seed(7, &[0, 1, 2]);
        assert_eq!(a, derive_seed(7, &[0, 1, 2]));
        assert_ne!(a, derive_seed(7, &[0, 2, 1]));
        assert_ne!(a, derive_seed(8, &[0, 1, 2]));
        let x: u64 = seeded(a).random();
        let y: u64 = seeded(a).random();
        assert_eq!(x, y);
    }
}
