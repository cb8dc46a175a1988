//! Seeded random streams.
//!
//! Every chain draws from a ChaCha8 generator seeded with the run seed and
//! switched to its own stream: chain `i` of a run uses stream `i`, so chains
//! sharing a seed never overlap and each chain is reproducible on its own.
//! Builders that need randomness (the random n-gon) use the reserved stream
//! [`BUILDER_STREAM`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Stream reserved for system construction.
pub const BUILDER_STREAM: u64 = u64::MAX;

pub fn chain_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
