//! Deterministic seed derivation.
//!
//! Every randomized component receives its own child seed derived from a
//! single user-supplied root seed plus a textual label (and optionally an
//! index). Components therefore draw from independent streams: adding or
//! reordering one randomized step never perturbs the draws of another, and
//! identical root seeds reproduce identical runs bit-for-bit.
//!
//! Derivation: the label is hashed with FNV-1a, folded into the root seed
//! and the index, and the result is finalized with the SplitMix64 mixer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
/// 2^64 / phi, the Weyl increment used by SplitMix64.
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed for the component named `label`.
pub fn split_seed(seed: u64, label: &str) -> u64 {
    split_seed_indexed(seed, label, 0)
}

/// Derive a child seed for the `idx`-th instance of the component named
/// `label` (per-draw, per-repetition, per-variable streams).
pub fn split_seed_indexed(seed: u64, label: &str, idx: u64) -> u64 {
    splitmix64(seed ^ fnv1a(label.as_bytes()) ^ idx.wrapping_mul(GOLDEN))
}

/// Construct the crate's standard RNG from a derived seed.
///
/// ChaCha8 is used everywhere: it is platform-independent, seedable and
/// fast enough that RNG cost never shows up in profiles.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
