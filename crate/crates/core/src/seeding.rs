//! Seed fan-out.
//!
//! A run has one master seed. Components get their own seed from a SHA-256
//! of the master seed and a label, so adding draws in one component never
//! shifts the random stream of another.

use sha2::{Digest, Sha256};

/// Seed for the component named `label`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Seed for item `index` of a sequence (frames, episodes, eval rollouts).
pub fn indexed_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined word
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
