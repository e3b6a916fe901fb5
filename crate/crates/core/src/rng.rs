//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! user seed and a stream id, so that independent consumers (splits, noise,
//! initialisation, dropout) never share state and any single draw can be
//! replayed from `(seed, stream)` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags occupy the high 16 bits of the stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Split = 1,
    Noise = 2,
    Init = 3,
    Dropout = 4,
    Synth = 5,
    Check = 6,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}
