//! Seeded random substreams.
//!
//! Every stochastic component draws from its own stream keyed by
//! `(master seed, purpose, index)` so that days, months and trees can be
//! generated independently and in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags for substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Mmse,
    Schedule,
    Trajectory,
    Episodes(u8),
    Tree,
    Derived,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Mmse => 1,
            Stream::Schedule => 2,
            Stream::Trajectory => 3,
            Stream::Episodes(k) => 0x100 + k as u64,
            Stream::Tree => 4,
            Stream::Derived => 5,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a purpose and index into a new 64-bit seed.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream.tag())) ^ splitmix64(index.wrapping_add(0x5851_F42D)))
}

pub fn substream(seed: u64, stream: Stream, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, stream, index))
}
