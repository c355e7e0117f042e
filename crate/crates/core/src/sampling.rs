//! Seed derivation and seeded sampling.
//!
//! Every random decision draws from a ChaCha8 stream keyed by a seed derived
//! from `(global seed, article id, call kind)`, so results do not depend on
//! scheduling order or thread count.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stable per-call seed: the first 8 bytes (little endian) of
/// SHA-256(global seed LE ‖ 0x00 ‖ article id ‖ 0x00 ‖ call kind).
pub fn derive_seed(global_seed: u64, article_id: &str, call_kind: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update([0u8]);
    h.update(article_id.as_bytes());
    h.update([0u8]);
    h.update(call_kind.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly samples `amount` distinct positions out of `0..len`, returned in
/// sampled order.
///
/// Panics if `amount > len`; callers check sizes first.
pub fn sample_positions(len: usize, amount: usize, seed: u64) -> Vec<usize> {
    index::sample(&mut rng(seed), len, amount).into_vec()
}
