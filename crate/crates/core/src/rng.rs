//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 (`rand_chacha`), a
//! counter-based generator with a published reference algorithm, so splits,
//! negatives and initial weights reproduce across platforms. Independent
//! consumers of one user seed are separated by ChaCha stream ids rather than
//! by seed arithmetic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids used by the pipeline. Keeping them in one place makes collisions
/// visible.
pub mod streams {
    pub const SPLIT: u64 = 1;
    pub const NEGATIVES_TRAIN: u64 = 2;
    pub const NEGATIVES_VALIDATION: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const TOY: u64 = 6;
}

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
