//! Keyed random streams.
//!
//! Every random decision is drawn from a ChaCha stream whose seed is the
//! SHA-256 of (global seed, purpose tag, item key). Streams for different
//! items are independent, so work can be reordered or parallelised without
//! changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Derive an independent stream for `(seed, tag, key)`.
pub fn stream(seed: u64, tag: &str, key: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update((key.len() as u64).to_le_bytes());
    hasher.update(key.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}
