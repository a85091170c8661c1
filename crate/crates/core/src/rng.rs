//! Named, independent random streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Subsystems that own a stream. Adding draws to one never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Mobility,
    Traffic,
    RadioLoss,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 0x494e_4954,
            Stream::Mobility => 0x4d4f_4249,
            Stream::Traffic => 0x5452_4146,
            Stream::RadioLoss => 0x4c4f_5353,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream `kind` for sub-index `index` (e.g. a UAV id) under `seed`.
pub fn stream(seed: u64, kind: Stream, index: u64) -> SimRng {
    let s = splitmix64(splitmix64(splitmix64(seed) ^ kind.tag()) ^ index);
    SimRng::seed_from_u64(s)
}
