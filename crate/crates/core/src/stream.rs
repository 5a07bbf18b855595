//! Deterministic, domain-separated random streams.
//!
//! Every random decision in the crate draws from a ChaCha stream whose key is
//! SHA-256(domain || seed || entity key). Streams are therefore independent of
//! iteration order and thread count: a session, customer, or boosting round
//! owns its stream no matter who evaluates it, which is what makes sampling
//! and generation bit-reproducible under any degree of parallelism.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// ChaCha stream keyed by (domain, seed, entity key).
pub fn rng(domain: &str, seed: u64, key: &[u8]) -> ChaCha12Rng {
    let mut h = Sha256::new();
    h.update(domain.as_bytes());
    h.update([0u8]);
    h.update(seed.to_le_bytes());
    h.update(key);
    let digest: [u8; 32] = h.finalize().into();
    ChaCha12Rng::from_seed(digest)
}

/// First uniform draw in [0, 1) from the (domain, seed, key) stream.
pub fn uniform01(domain: &str, seed: u64, key: &[u8]) -> f64 {
    use rand::Rng;
    rng(domain, seed, key).random::<f64>()
}

/// Stable 64-bit hash of (domain, seed, key), for order statistics.
pub fn hash64(domain: &str, seed: u64, key: &[u8]) -> u64 {
    let mut h = Sha256::new();
    h.update(domain.as_bytes());
    h.update([0u8]);
    h.update(seed.to_le_bytes());
    h.update(key);
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
