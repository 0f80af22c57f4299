//! Seed derivation and generator construction.
//!
//! Every stochastic component takes its own generator, derived from a master
//! seed and a stream index, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of stream `index` from `master`.
pub fn derive(master: u64, index: u64) -> u64 {
    mix(mix(master) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(master: u64, index: u64) -> Rng {
    rng(derive(master, index))
}
