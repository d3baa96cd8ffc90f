//! Reproducible random streams.
//!
//! Every chain owns an independent ChaCha8 stream selected by `(seed, chain)`.
//! ChaCha is counter based, so streams never overlap and a chain's draws do
//! not depend on how chains are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Stream for chain `chain` under master seed `seed`.
pub fn chain_rng(seed: u64, chain: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// Sub-stream for a named task inside a chain (data simulation, grids, ...).
pub fn task_rng(seed: u64, chain: u64, task: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ task.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(chain);
    rng
}
