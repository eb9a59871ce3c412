//! Deterministic seeded randomness.
//!
//! Every stochastic operation in the crate takes an explicit RNG; the same
//! 64-bit seed always reproduces the same stream, across platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SeededRng = ChaCha12Rng;

/// Root RNG for a run.
pub fn seeded(seed: u64) -> SeededRng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Independent child stream, e.g. one per Monte Carlo worker. Derived from
/// the parent seed and an index so that parallel reductions stay
/// deterministic regardless of scheduling.
pub fn child(seed: u64, index: u64) -> SeededRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    key[16] = 0xa5;
    ChaCha12Rng::from_seed(key)
}
