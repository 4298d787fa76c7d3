use sha2::{Digest, Sha256};

/// SHA-256 of `bytes` as lowercase hex; used for provenance strings so
/// outputs stay byte-identical across runs on identical inputs.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}
