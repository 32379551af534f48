//! Seeded randomness helpers. Every stochastic routine in this crate goes
//! through these so a seed fully determines behaviour on every platform.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fisher-Yates shuffle of `0..n`.
pub fn shuffled_indices(n: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..n.saturating_sub(1) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx
}

/// First `count` entries of a Fisher-Yates pass, i.e. a uniform sample of
/// `0..n` without replacement. Only `count` swaps are performed, so the
/// draw for a given `(n, count, seed)` is stable even if `n - count`
/// trailing elements would never be inspected.
pub fn sample_without_replacement(n: usize, count: usize, rng: &mut SeededRng) -> Vec<usize> {
    debug_assert!(count <= n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(count);
    idx
}
