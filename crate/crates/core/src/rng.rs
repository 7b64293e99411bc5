//! Explicitly seeded, splittable random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream addressed by
//! `(seed, purpose, index)`, so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purposes partition the stream space so independent consumers never share
/// draws for the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    RansacCircle = 1,
    RansacFundamental = 2,
    LatentNoise = 3,
    ConditionNoise = 4,
    IrregularMask = 5,
    Anchors = 6,
    SynthMatches = 7,
    ReferenceSplit = 8,
    Generic = 99,
}

/// Independent stream for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Stream id: purpose in the top 16 bits, index below.
    rng.set_stream(((purpose as u64) << 48) ^ (index & 0x0000_ffff_ffff_ffff));
    rng
}

/// Mixes `index` into `seed` (SplitMix64 finalizer), for handing
/// independent seeds to per-item sub-tasks.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
