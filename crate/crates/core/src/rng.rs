//! Deterministic per-ray random streams.
//!
//! Every ray (or pixel) gets its own counter-based ChaCha stream derived from
//! a global seed, so results are bit-identical however the work is scheduled
//! across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for stream `index` under `seed`. Streams are independent; drawing
/// from one never affects another.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
