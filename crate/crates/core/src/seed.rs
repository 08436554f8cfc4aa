//! Reproducible random substreams.
//!
//! A [`SeedSpec`] names one substream as `(master_seed, stream_index)`. The
//! generator for a substream is a ChaCha8 stream seeded (through
//! `SeedableRng::seed_from_u64`) with
//!
//! ```text
//! state = mix(master_seed ^ mix(stream_index + 0x9E3779B97F4A7C15))
//! ```
//!
//! where `mix` is the splitmix64 finalizer. Any implementation that follows
//! this recipe reproduces the same draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        SeedSpec { master_seed, stream_index }
    }

    /// Same master seed, another stream.
    pub fn stream(&self, stream_index: u64) -> Self {
        SeedSpec { master_seed: self.master_seed, stream_index }
    }

    /// A fresh master seed for a sub-experiment, keyed by `tag`. Forks with
    /// different tags (or from different substreams) do not share streams.
    pub fn fork(&self, tag: u64) -> Self {
        SeedSpec {
            master_seed: mix(self.state() ^ mix(tag ^ 0xD1B5_4A32_D192_ED03)),
            stream_index: 0,
        }
    }

    /// The 64-bit generator state of this substream.
    pub fn state(&self) -> u64 {
        mix(self.master_seed ^ mix(self.stream_index.wrapping_add(GOLDEN_GAMMA)))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.state())
    }
}
