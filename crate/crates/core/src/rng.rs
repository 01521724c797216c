//! Deterministic random substreams.
//!
//! Every random draw in the crate comes from a [`Stream`] opened from a
//! [`StreamKey`]. Keys form a tree: a master seed is split into per-run,
//! per-round, per-agent and per-bootstrap children, so any job can be
//! evaluated in isolation (or in parallel) and still reproduce the exact
//! draws of a serial run.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Stream = Xoshiro256PlusPlus;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub const fn new(seed: u64) -> Self {
        StreamKey(seed)
    }

    pub const fn seed(self) -> u64 {
        self.0
    }

    /// Key of the `index`-th child. Children of distinct indices are
    /// statistically independent of each other and of the parent.
    #[inline]
    pub fn child(self, index: u64) -> Self {
        StreamKey(splitmix64(self.0 ^ splitmix64(index ^ 0x632B_E59B_D9B4_E019)))
    }

    #[inline]
    pub fn stream(self) -> Stream {
        Stream::seed_from_u64(self.0)
    }
}

#[inline]
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
