//! Stable per-item seeds.
//!
//! Every stochastic stage seeds its generator from SHA-256 over the global
//! seed, the stage name and the item id, so the value for one utterance does
//! not depend on which other utterances are processed or in what order.

use sha2::{Digest, Sha256};

pub fn derive_seed(global: u64, stage: &str, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update((stage.len() as u64).to_le_bytes());
    h.update(stage.as_bytes());
    h.update(id.as_bytes());
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}
