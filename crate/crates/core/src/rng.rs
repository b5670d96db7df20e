//! Seeded random streams.
//!
//! Every stochastic operation takes an explicit `u64` seed. Work that is split
//! into independent items (one Monte-Carlo sample, one base instance) draws
//! from its own stream, derived from `(seed, item index)`, so results do not
//! depend on how the items are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix(seed.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(mix(stream.wrapping_add(1))))
}

pub fn stream(seed: u64, index: u64) -> Rng {
    seeded(derive_seed(seed, index))
}
