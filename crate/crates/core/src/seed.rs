//! Deterministic seed derivation.
//!
//! A child seed is the first output of a ChaCha8 generator seeded with the
//! parent and positioned on stream `index`. Children of one parent are
//! independent of each other and of the parent's own stream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn child_seed(parent: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(parent);
    rng.set_stream(index.wrapping_add(1));
    rng.next_u64()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_are_stable_and_distinct() {
        assert_eq!(child_seed(7, 3), child_seed(7, 3));
        let kids: std::collections::BTreeSet<u64> = (0..100).map(|i| child_seed(7, i)).collect();
        assert_eq!(kids.len(), 100);
        assert_ne!(child_seed(7, 0), child_seed(8, 0));
    }
}
