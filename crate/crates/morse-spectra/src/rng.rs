//! Deterministic, fork-safe random number streams.
//!
//! Every Monte Carlo estimator in the crate draws from a [`ChaCha8Rng`]
//! derived from a *master seed* and a *task index*. Parallel trials each get
//! their own stream, so results are identical no matter how work is scheduled
//! (serial mode and the rayon path produce bit-identical numbers: streams are
//! consumed per task and reductions collect in task order).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer — a cheap, well-mixed 64-bit hash.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the RNG for task `task` (trial index, grid tile, ...) under
/// `master`. Distinct `(master, task)` pairs give independent streams.
pub fn task_rng(master: u64, task: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    let mut state = splitmix64(master ^ 0x6d6f_7273_652d_7370) ^ task.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for chunk in seed.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Sub-derive: a second-level task split (e.g. per-field, then per-tile).
pub fn sub_rng(master: u64, task: u64, subtask: u64) -> ChaCha8Rng {
    task_rng(splitmix64(master ^ splitmix64(task)), subtask)
}
