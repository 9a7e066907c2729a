//! Seeded random streams.
//!
//! All sampling goes through [`SimRng`], a ChaCha8 generator. ChaCha is
//! counter based, so `(seed, stream)` pairs give independent, reproducible
//! substreams for parallel workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream rooted at `seed`.
pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a fresh 64-bit seed from `rng`, used to root a family of substreams.
pub fn fork_seed(rng: &mut SimRng) -> u64 {
    rng.random()
}

/// Index drawn from a cumulative distribution table. Ties go to the lowest
/// index; the last entry is treated as 1 so rounding never falls off the end.
pub(crate) fn sample_cdf(cdf: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let idx = cdf.partition_point(|&c| c <= u);
    idx.min(cdf.len() - 1)
}
