//! Keyed random streams.
//!
//! Every random draw in the simulator comes from a ChaCha20 stream whose
//! seed is the SHA-256 digest of a domain label, a key and a list of
//! indices. Streams for different (label, key, indices) tuples are
//! independent, and a stream never depends on which other streams were
//! consumed before it.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha20Rng;

/// Derive a 32-byte seed from a domain label, key bytes and indices.
pub fn derive_seed(domain: &str, key: &[u8], indices: &[u64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update((domain.len() as u64).to_le_bytes());
    hasher.update(domain.as_bytes());
    hasher.update((key.len() as u64).to_le_bytes());
    hasher.update(key);
    for idx in indices {
        hasher.update(idx.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    seed
}

pub fn stream(domain: &str, key: &[u8], indices: &[u64]) -> StreamRng {
    StreamRng::from_seed(derive_seed(domain, key, indices))
}

/// Stream keyed by a 64-bit master seed.
pub fn seeded(domain: &str, master: u64, indices: &[u64]) -> StreamRng {
    stream(domain, &master.to_le_bytes(), indices)
}

/// Stable 64-bit tag of a string, for folding names into stream indices.
pub fn tag(name: &str) -> u64 {
    let seed = derive_seed("tag", name.as_bytes(), &[]);
    u64::from_le_bytes(seed[..8].try_into().expect("8 bytes"))
}
