//! Seed derivation.
//!
//! Every random stream in a run is a `ChaCha8Rng` seeded from a value derived
//! here, so results never depend on thread scheduling or platform RNG choices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer. Bijective on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a stream index.
pub fn derive(parent: u64, index: u64) -> u64 {
    parent ^ mix64(index)
}

/// Domain tags keep the per-step streams apart.
pub(crate) const TAG_FOLDS: u64 = 0x464f_4c44_5300_0000;
pub(crate) const TAG_CANDIDATES: u64 = 0x4341_4e44_0000_0000;

/// Seed of the fold assignments used by every candidate at one step.
pub fn step_fold_seed(run_seed: u64, dimension: usize) -> u64 {
    mix64(derive(run_seed ^ TAG_FOLDS, dimension as u64))
}

/// Seed of the candidate-generation stream at one step.
pub fn step_candidate_seed(run_seed: u64, dimension: usize) -> u64 {
    mix64(derive(run_seed ^ TAG_CANDIDATES, dimension as u64))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
