//! Deterministic derivation of independent RNG streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose seed is
//! derived from a user-facing seed, a fixed stream tag, and an index. Runs
//! are therefore reproducible from the two seeds in a config alone.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const STREAM_WORKER: u64 = 1;
pub(crate) const STREAM_SUBSET: u64 = 2;
pub(crate) const STREAM_POWER_ITER: u64 = 3;
pub(crate) const STREAM_HETEROGENEITY: u64 = 4;
pub(crate) const STREAM_SYNTH_TRUTH: u64 = 10;
pub(crate) const STREAM_SYNTH_WORKER: u64 = 11;
pub(crate) const STREAM_SPLIT: u64 = 12;
pub(crate) const STREAM_PARTITION: u64 = 13;
pub(crate) const STREAM_REPEAT: u64 = 20;

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `stream`/`index` hanging off `base`.
pub(crate) fn derive(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index)
}

pub(crate) fn stream_rng(base: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, stream, index))
}
