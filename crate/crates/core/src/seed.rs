//! Named random sub-streams derived from one run seed.
//!
//! Each consumer (`init`, `sampling`, `subsample`, ...) gets an independent
//! ChaCha stream keyed by `sha256(seed || name)`, so adding a consumer never
//! shifts the draws another one sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const INIT: &str = "init";
pub const SAMPLING: &str = "sampling";
pub const SUBSAMPLE: &str = "subsample";
pub const WORLDS: &str = "worlds";

pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Derives a child seed, e.g. one per sweep cell.
pub fn derive(seed: u64, name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(b"derive:");
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
