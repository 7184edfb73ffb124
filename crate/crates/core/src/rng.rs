//! Seeded random streams.
//!
//! Every experiment derives independent substreams from a master seed as
//! `SHA-256(master_seed || tag || index)`, so trials can run on any number of
//! workers and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// The generator used throughout the crate.
pub type SimRng = ChaCha20Rng;

/// Derives substream `index` of experiment `tag` from `master_seed`.
pub fn substream(master_seed: u64, tag: &str, index: u64) -> SimRng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    SimRng::from_seed(digest)
}

/// A stream seeded directly from a `u64`, for tests and single runs.
pub fn from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
