//! Seed plumbing. Every stochastic routine takes a root seed and derives an
//! independent ChaCha stream from it, so results do not depend on the order
//! in which parallel tasks run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// RNG for stream `stream` of root seed `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stable 64-bit stream id for a name.
pub fn stream_id(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// RNG for a named substream of `seed`.
pub fn named(seed: u64, name: &str) -> ChaCha8Rng {
    stream(seed, stream_id(name))
}

/// Child seed for task `index` of substream `name`.
pub fn child_seed(seed: u64, name: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
