//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator whose seed is
//! derived from the user's master seed, a component label and an index.
//! The derivation hashes `master || label || index` with SHA-256 so that
//! streams are stable across platforms and independent of thread
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a child seed for `label`/`index` from `master`.
pub fn derive(master: u64, label: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// A generator seeded directly from `seed`.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A generator for the derived stream `label`/`index`.
pub fn stream(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    rng(derive(master, label, index))
}
