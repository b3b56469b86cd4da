//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own SplitMix64 stream derived
//! from the global seed, a stream tag, and an index (epoch, example, ...).
//! Streams never share state, so adding draws to one stream cannot shift
//! another.

use rand::SeedableRng;
pub use rand_xoshiro::SplitMix64;

/// Global default seed used by every entry point.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Shuffle,
    Dropout,
    Folds,
    Split,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 0x1d1e_0001,
            Stream::Shuffle => 0x1d1e_0002,
            Stream::Dropout => 0x1d1e_0003,
            Stream::Folds => 0x1d1e_0004,
            Stream::Split => 0x1d1e_0005,
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for `(seed, stream, index)`.
pub fn stream(seed: u64, stream: Stream, index: u64) -> SplitMix64 {
    let state = mix(mix(seed ^ stream.tag().wrapping_mul(0x9e37_79b9_7f4a_7c15)) ^ index);
    SplitMix64::seed_from_u64(state)
}
