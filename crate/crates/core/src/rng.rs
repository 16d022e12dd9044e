//! Seed derivation.
//!
//! Every random stream is a ChaCha20 generator (`rand_chacha`) keyed by
//! `SHA-256(master_seed_le ‖ label)` with its stream id set to an item
//! index, so any item can be regenerated independently of the others.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// 32-byte key for `(master, label)`.
pub fn derive_key(master: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

/// Generator for item `index` of the stream family `(master, label)`.
pub fn stream_rng(master: u64, label: &str, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::from_seed(derive_key(master, label));
    rng.set_stream(index);
    rng
}
