//! Seed handling shared by every simulation.
//!
//! Simulation `i` under master seed `m` always draws from
//! `ChaCha8Rng::seed_from_u64(m.wrapping_add(i))`, so results do not depend on
//! thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for simulation `index` under `master_seed`.
pub fn sim_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(master_seed.wrapping_add(index))
}

/// Generator for an auxiliary stream of the same seed (jumps, fundamentals).
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
