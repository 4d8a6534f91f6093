//! Seed derivation.
//!
//! Every random component draws from a ChaCha8 stream seeded by
//! `derive(parent, tag, index)`, so a whole index or campaign is a pure
//! function of the single user seed. The mixing step is SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) mod tag {
    pub const COARSE: u64 = 1;
    pub const L2: u64 = 2;
    pub const NORM_COPY: u64 = 3;
    pub const LADDER: u64 = 4;
    pub const CLUSTER: u64 = 5;
    pub const DATASET: u64 = 6;
    pub const QUERY: u64 = 7;
    pub const BUILD: u64 = 8;
    pub const GRID: u64 = 9;
    pub const TABLE: u64 = 10;
    pub const CAMPAIGN: u64 = 11;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for component `tag`, instance `index`, under `parent`.
pub fn derive(parent: u64, tag: u64, index: u64) -> u64 {
    let a = splitmix64(parent ^ splitmix64(tag));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
