//! Counter-based random streams keyed by `(seed, replica, step)`.
//!
//! Every stream is a ChaCha8 instance whose key is derived from the seed
//! and replica index and whose stream id is the step index, so a value
//! depends only on its coordinates and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `replica` under `base_seed`.
pub fn replica_seed(base_seed: u64, replica: u64) -> u64 {
    mix64(base_seed ^ mix64(replica.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Stream for `(seed, step)`.
pub fn stream(seed: u64, step: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut s = seed;
    for chunk in key.chunks_exact_mut(8) {
        s = mix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(step);
    rng
}
