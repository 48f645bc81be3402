//! Stable, platform-independent hashing used for feature hashing and
//! per-pair seed derivation. Values must never change between releases.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over a byte slice.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv1a_extend(FNV_OFFSET, bytes)
}

fn fnv1a_extend(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer; spreads FNV output over all bits.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent seed from a global seed and a sequence of labels.
/// Labels are length-prefixed so ("ab","c") and ("a","bc") differ.
pub fn derive_seed(global: u64, labels: &[&str]) -> u64 {
    let mut h = fnv1a_extend(FNV_OFFSET, &global.to_le_bytes());
    for label in labels {
        h = fnv1a_extend(h, &(label.len() as u64).to_le_bytes());
        h = fnv1a_extend(h, label.as_bytes());
    }
    mix64(h)
}
