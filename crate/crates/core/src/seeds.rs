//! Deterministic seed derivation.
//!
//! Every random stream in a campaign is keyed by a chain of integer labels
//! mixed through splitmix64, so results are reproducible across runs and
//! independent of execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Mix a label chain into a single seed.
pub fn derive(parts: &[u64]) -> u64 {
    let mut h = 0x243f6a8885a308d3u64;
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

pub fn rng_from(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(parts))
}

/// Stream labels for the independent random purposes within a campaign.
pub mod stream {
    pub const DATASET: u64 = 1;
    pub const INIT: u64 = 2;
    pub const TRAIN_SHUFFLE: u64 = 3;
    pub const STRESS_INSTANCE: u64 = 4;
    pub const PERTURBATION: u64 = 5;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_order_and_length_sensitive() {
        assert_eq!(derive(&[0]), derive(&[0]));
        assert_ne!(derive(&[0, 1]), derive(&[1, 0]));
        assert_ne!(derive(&[7]), derive(&[7, 0]));
    }

    #[test]
    fn splitmix_reference_values() {
        // Reference outputs for seed 0 of the published splitmix64 stream.
        assert_eq!(splitmix64(0), 0xe220a8397b1dcdaf);
        assert_eq!(splitmix64(1), 0x910a2dec89025cc1);
    }

    #[test]
    fn rng_streams_reproduce() {
        use rand::RngCore;
        let mut a = rng_from(&[42, 1, 7]);
        let mut b = rng_from(&[42, 1, 7]);
        assert_eq!(a.next_u64(), b.next_u64());
        let mut c = rng_from(&[42, 1, 8]);
        assert_ne!(a.next_u64(), c.next_u64());
    }
}
