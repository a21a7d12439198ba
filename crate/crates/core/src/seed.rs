//! Deterministic seed derivation.
//!
//! Every random decision in the pipeline draws from a ChaCha stream whose
//! seed is derived from a master seed plus a stable context (instance id,
//! trial index, purpose tag). Derivation uses SplitMix64 over the mixed
//! inputs so the same context always yields the same stream on every
//! platform, and distinct contexts yield independent streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; a full-period mixer over u64.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a string, for mixing ids into seed derivation.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derives a child seed from a master seed and an ordered list of context words.
pub fn derive_seed(master: u64, context: &[u64]) -> u64 {
    let mut state = master;
    let mut out = splitmix64(&mut state);
    for &word in context {
        state ^= word;
        out ^= splitmix64(&mut state);
    }
    out
}

/// Seeded RNG used throughout; ChaCha8 is reproducible across platforms.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
