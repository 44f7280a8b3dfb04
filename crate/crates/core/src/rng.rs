//! Seeded random streams.
//!
//! All randomness comes from xoshiro256++ generators. A stream is keyed by a
//! user seed and a [`Purpose`], so changing e.g. the shuffle seed never moves
//! the initialization or corruption draws.

use rand::SeedableRng;
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};

pub type Rng = Xoshiro256PlusPlus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init,
    Shuffle,
    Corruption,
    Split,
    Synthetic,
    Probe,
    PowerIteration,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 0x696e_6974,
            Purpose::Shuffle => 0x7368_7566,
            Purpose::Corruption => 0x636f_7272,
            Purpose::Split => 0x7370_6c74,
            Purpose::Synthetic => 0x7379_6e74,
            Purpose::Probe => 0x7072_6f62,
            Purpose::PowerIteration => 0x706f_7772,
        }
    }
}

/// Generator for `(seed, purpose)`.
pub fn stream(seed: u64, purpose: Purpose) -> Rng {
    substream(seed, purpose, 0)
}

/// Generator for `(seed, purpose, index)`, e.g. one shuffle stream per epoch.
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> Rng {
    use rand::RngCore;
    let mut mix = SplitMix64::seed_from_u64(seed);
    let a = mix.next_u64() ^ purpose.tag().wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut mix = SplitMix64::seed_from_u64(a ^ index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    Xoshiro256PlusPlus::seed_from_u64(mix.next_u64())
}
