//! Seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used by every stochastic model in the crate.
pub type SimRng = ChaCha8Rng;

/// Creates the generator for `seed`.
pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Derives an independent stream for sub-component `index` of a run seeded
/// with `seed`.
///
/// Streams are selected through the ChaCha stream counter, so neighbouring
/// indices never overlap.
pub fn substream(seed: u64, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}
