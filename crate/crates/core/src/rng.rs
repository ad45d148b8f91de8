//! Seeded randomness.
//!
//! Every random draw in the crate comes from ChaCha20 (`rand_chacha` 0.9),
//! keyed by a 64-bit [`RngSeed`] and split into independent streams with
//! `set_stream`. A stream id names one consumer (entity init, shuffling, ...),
//! so adding draws to one consumer never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl Default for RngSeed {
    fn default() -> Self {
        RngSeed(DEFAULT_SEED)
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

/// Stream ids. Values are part of the reproducibility contract.
pub mod stream {
    pub const ENTITY_INIT: u64 = 1;
    pub const RELATION_INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const BENCH_SAMPLE: u64 = 4;
    pub const VALID_SAMPLE: u64 = 5;
    pub const GRADCHECK: u64 = 6;
    pub const SYNTHETIC: u64 = 7;
}

impl RngSeed {
    pub fn stream(self, id: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.0);
        rng.set_stream(id);
        rng
    }
}
