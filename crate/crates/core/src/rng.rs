//! Named, independent random streams derived from one run seed.
//!
//! Every consumer of randomness gets its own ChaCha stream so that turning a
//! feature on or off never shifts the draws seen by the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Problem = 0,
    Rows = 1,
    Workers = 2,
    TieBreak = 3,
    AdversaryNoise = 4,
    PoolAssignment = 5,
    PoolErrors = 6,
    MonteCarlo = 7,
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
