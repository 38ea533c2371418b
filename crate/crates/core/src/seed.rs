//! Named random sub-streams derived from one global seed.
//!
//! Every stage draws from its own stream so that switching a stage on or off
//! never shifts the numbers seen by another stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Data,
    Init,
    Shuffle,
    Clusters,
    Attempts,
}

impl Stream {
    fn tag(self) -> &'static str {
        match self {
            Stream::Data => "data",
            Stream::Init => "init",
            Stream::Shuffle => "shuffle",
            Stream::Clusters => "clusters",
            Stream::Attempts => "attempts",
        }
    }
}

/// Derive a child seed for `(global, stream, index)`.
pub fn derive_seed(global: u64, stream: Stream, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global.to_le_bytes());
    hasher.update(stream.tag().as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(global: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    rng_from_seed(derive_seed(global, stream, index))
}
