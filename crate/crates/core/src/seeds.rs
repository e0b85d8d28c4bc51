//! Deterministic seed splitting.
//!
//! A child seed is the first eight bytes, read little-endian, of
//!
//! ```text
//! SHA-256( master_seed as u64 LE || task_label as UTF-8 || 0x00 || index as u64 LE )
//! ```
//!
//! Children depend only on `(master, label, index)`, never on execution
//! order, so parallel runs reproduce serial ones bit for bit.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn child_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    h.update([0u8]);
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// A child seed together with the label and index that produced it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SeedRecord {
    pub label: String,
    pub index: u64,
    pub seed: u64,
}

impl SeedRecord {
    pub fn derive(master: u64, label: impl Into<String>, index: u64) -> Self {
        let label = label.into();
        let seed = child_seed(master, &label, index);
        SeedRecord { label, index, seed }
    }
}
