//! Stable seed derivation.
//!
//! Every random stream in a campaign descends from one 64-bit master seed
//! through [`derive`], so output bytes depend only on the configuration and
//! never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream type used throughout the simulator.
pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for stream `index` under `parent`.
///
/// Bijective in `index` for a fixed parent, so distinct indices never collide.
pub fn derive(parent: u64, index: u64) -> u64 {
    mix64(mix64(parent).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn rng_from(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn drop_seeds_do_not_collide() {
        let master = 0xdead_beef;
        let mut seen = HashSet::with_capacity(1_000_000);
        for i in 0..1_000_000u64 {
            assert!(seen.insert(derive(master, i)), "collision at {i}");
        }
    }

    #[test]
    fn derivation_is_stable() {
        assert_eq!(derive(1, 0), derive(1, 0));
        assert_ne!(derive(1, 0), derive(2, 0));
        // frozen so that refactors cannot silently change campaign outputs
        assert_eq!(mix64(0), 0);
        assert_eq!(mix64(1), 0x5692_161d_100b_05e5);
    }
}
