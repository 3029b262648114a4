//! Deterministic sub-seed derivation: every random draw in the crate flows
//! from a base seed mixed with a textual tag, so runs are reproducible
//! across platforms.

/// FNV-1a over the tag, then a splitmix64 finalizer.
pub fn mix_seed(base: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ base.wrapping_mul(0x9e3779b97f4a7c15);
    for b in tag.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut z = h.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
