//! Deterministic expansion of one master seed into per-component seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives an independent sub-seed for a named component.
pub fn derive(master: u64, tag: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(index.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}

pub fn rng(master: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, tag, index))
}

/// Sub-seeds used by one training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub init: u64,
    pub data: u64,
    pub reservoir: u64,
    pub detector: u64,
    pub adapt: u64,
}

impl RunSeeds {
    pub fn from_master(master: u64) -> Self {
        Self {
            init: derive(master, "init", 0),
            data: derive(master, "data", 0),
            reservoir: derive(master, "reservoir", 0),
            detector: derive(master, "detector", 0),
            adapt: derive(master, "adapt", 0),
        }
    }
}
