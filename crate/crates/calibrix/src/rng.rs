//! Reproducible random streams.
//!
//! All randomness comes from ChaCha20 seeded with a `u64`; independent tasks
//! use distinct ChaCha stream ids derived from one master seed, so results do
//! not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Rng = ChaCha20Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Generator for task `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng
}
