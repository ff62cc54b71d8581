//! Seed derivation shared by every stochastic component.
//!
//! All randomness goes through ChaCha8 generators. A component asks for a
//! generator by `(seed, stream, index)`: the stream separates independent
//! consumers that share a user seed, and the index is mixed in as
//! `seed ^ index` so per-item generators (one per permutation, one per
//! speaker) are identical whether items are processed serially or in
//! parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Streams reserved for the different consumers of a user seed.
pub mod stream {
    pub const TRIALS: u64 = 1;
    pub const SUBSAMPLE: u64 = 2;
    pub const PERMUTATION: u64 = 3;
    pub const INIT: u64 = 4;
    pub const BATCHES: u64 = 5;
    pub const DROPOUT: u64 = 6;
    pub const LABELS: u64 = 7;
    pub const SPLIT: u64 = 8;
    pub const SYNTH_DIRECTIONS: u64 = 9;
    pub const SYNTH_SPEAKER: u64 = 10;
    pub const PROBE: u64 = 11;
}

pub fn derive(seed: u64, stream: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index);
    rng.set_stream(stream);
    rng
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    derive(seed, stream, 0)
}
