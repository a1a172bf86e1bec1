//! Deterministic per-episode random sources.
//!
//! Every episode of a run draws from its own generator, keyed by the run
//! seed and the episode index. Replays are byte-identical and a run can be
//! resumed at any episode boundary without replaying the generator history.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for episode `episode` (1-based) of the run with seed `seed`.
pub fn episode_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    let mut state = seed ^ episode.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
