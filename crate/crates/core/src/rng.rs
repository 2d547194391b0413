//! Seeded random streams.
//!
//! Every random draw in the crate goes through a [`SimRng`]. Independent streams are
//! derived from a `(seed, stream)` pair so that blocks and trials can run in any order
//! and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A fresh 64-bit seed for child index `index`, drawn from stream `index` of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream_rng(seed, index).next_u64()
}
