//! Content-derived identifiers and seeds.

use sha2::{Digest, Sha256};

/// Hex-encoded 128-bit prefix of the SHA-256 of the length-prefixed parts.
pub fn stable_id(parts: &[&[u8]]) -> String {
    hex::encode(&digest(parts)[..16])
}

/// 128-bit fingerprint of a prompt or any other text.
pub fn fingerprint(text: &str) -> String {
    stable_id(&[text.as_bytes()])
}

/// Derive an independent 64-bit seed for one item of one stage.
///
/// Every random decision in a run goes through this, so results depend only
/// on the master seed, the stage name and the item index.
pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    let d = digest(&[&master.to_le_bytes(), stage.as_bytes(), &index.to_le_bytes()]);
    u64::from_le_bytes(d[..8].try_into().expect("8-byte slice"))
}

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hasher.finalize().into()
}
