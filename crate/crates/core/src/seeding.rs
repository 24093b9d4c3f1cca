//! Deterministic seed derivation.
//!
//! Every stochastic component (dataset, per-epoch tree noise, perturbation
//! draws, verification probes) owns an independent RNG stream derived from a
//! base seed and a stream tag. Derivation is a splitmix64 hash of the pair, so
//! streams are decorrelated and adding a consumer never shifts another
//! stream's draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive an independent stream seed from a base seed and a stream tag.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for a derived stream.
pub fn stream_rng(base: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tag))
}
