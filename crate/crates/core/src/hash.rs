use sha2::{Digest, Sha256};

/// Hex SHA-256 over the concatenation of `parts`, each prefixed by its length
/// so that part boundaries are unambiguous.
pub fn content_hash<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}
