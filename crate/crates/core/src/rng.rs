//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, purpose, stream_id, position)`: the
//! ChaCha key is derived from the seed and a purpose tag, the ChaCha stream
//! selector is the path index. Paths can therefore be generated in any order and
//! on any number of workers with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

/// Purpose tags separating the independent noise sources of one path.
pub mod purpose {
    pub const INITIAL_VALUE: u64 = 0x01;
    pub const PHI_DRIVER: u64 = 0x02;
    pub const WIENER: u64 = 0x03;
    pub const PERTURBATION: u64 = 0x04;
    pub const PERMUTATION: u64 = 0x05;
    pub const WALK: u64 = 0x06;
    pub const INTEGRAND: u64 = 0x07;
    pub const COUPLING_B: u64 = 0x08;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseSeed {
    pub seed: u64,
    pub stream_id: u64,
}

impl NoiseSeed {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub const fn with_stream(self, stream_id: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id,
        }
    }

    /// Seed of an independent family, same stream index.
    pub fn derive(self, purpose: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(purpose.wrapping_add(0x5851_F42D_4C95_7F2D))),
            stream_id: self.stream_id,
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        let mut state = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
