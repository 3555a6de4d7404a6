//! Seeded random number generation.
//!
//! Every stochastic step (initialization, sub-sampling, corruption, fold
//! assignment, k-means seeding) draws from a [`Rng`] derived from a `u64`
//! seed, so runs are reproducible bit for bit.

use rand::SeedableRng;

/// The generator used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-task (e.g. run `index` of an
/// evaluation protocol) from a base seed.
pub fn derive(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
