//! Deterministic random number helpers.
//!
//! Everything stochastic in the pipeline draws from a seeded ChaCha8
//! stream; `sub_seed` derives independent streams for sub-tasks so the
//! result of one draw sequence never depends on the order of another.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as DetRng;

pub fn rng_from_seed(seed: u64) -> DetRng {
    DetRng::seed_from_u64(seed)
}

/// Derives a child seed from a master seed and a tag path (splitmix64 mix).
pub fn sub_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &t in tags {
        state = state.wrapping_add(t).wrapping_add(0x9e37_79b9_7f4a_7c15);
        state = mix(state);
    }
    mix(state)
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
