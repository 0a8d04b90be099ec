//! Reproducible random streams.
//!
//! Stream `i` under master seed `s` is `ChaCha8Rng::seed_from_u64(s)` with
//! its stream counter set to `i`. Streams are independent and the mapping is
//! stable across platforms and thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(master: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}
