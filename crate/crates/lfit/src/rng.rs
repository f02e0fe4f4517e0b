//! Seed derivation.
//!
//! Every random stream in the toolkit is derived from a master seed and a
//! small set of integer tags via a SplitMix64 hash chain:
//!
//! ```text
//! seed(master, tag, index) = mix(mix(mix(master) ^ tag) ^ index)
//! ```
//!
//! Workers therefore draw from independent, reproducible streams: results
//! do not depend on scheduling or thread count, only on the derived seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags, one per independent consumer of randomness.
pub mod streams {
    /// Per-simulation streams used when generating a table.
    pub const TABLE_SIM: u64 = 1;
    /// Per-test-dataset streams.
    pub const TEST_DATA: u64 = 2;
    /// Cross-validation fold shuffling.
    pub const CV_FOLDS: u64 = 3;
    /// Observed-data generation for one-off analyses.
    pub const OBSERVED: u64 = 4;
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed, a stream tag and an index.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    mix(mix(mix(master) ^ tag) ^ index)
}

/// A seeded generator for the given (master, tag, index) stream.
pub fn stream_rng(master: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, index))
}
