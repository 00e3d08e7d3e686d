//! Seeded counter-based random streams.
//!
//! Every random quantity in the toolkit is drawn from a ChaCha stream keyed by
//! `(seed, a, b)`. Two call sites with different keys never share state, so the
//! output of a parallel loop does not depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// First-key tags reserved for non-decoder streams. Decoder restarts use the
/// iteration index as the first key, which stays far below these.
pub(crate) const TAG_LLOYD: u64 = u64::MAX - 1;
pub(crate) const TAG_GMM_ROWS: u64 = u64::MAX - 2;
pub(crate) const TAG_SPEC: u64 = u64::MAX - 3;

/// Independent stream for the pair `(a, b)` under `seed`.
pub fn substream(seed: u64, a: u64, b: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&a.to_le_bytes());
    key[16..24].copy_from_slice(&b.to_le_bytes());
    key[24..].copy_from_slice(b"cskit\0\0\0");
    ChaCha8Rng::from_seed(key)
}

/// Top-level stream for a seed.
pub fn stream(seed: u64) -> StreamRng {
    substream(seed, u64::MAX, u64::MAX)
}
