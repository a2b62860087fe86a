//! Seeded, replayable random streams.
//!
//! Every random draw comes from a ChaCha8 stream keyed by a 64-bit seed and a
//! stream id. A replica's seed is `splitmix64` of the master seed mixed with the
//! replica index. Inside a replica, stream 0 draws the true means, stream 1 the
//! setup draws of a schedule, and each phase `p` owns stream `2 + 2p` for its
//! branch resolution and `3 + 2p` for its rewards.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream id of the true-mean draw.
pub const MEANS: u64 = 0;
/// Stream id of schedule setup draws.
pub const SETUP: u64 = 1;

/// Stream id for decisions taken during phase `p`.
pub fn decisions(p: usize) -> u64 {
    2 + 2 * p as u64
}

/// Stream id for rewards observed during phase `p`.
pub fn rewards(p: usize) -> u64 {
    3 + 2 * p as u64
}

/// SplitMix64 finalizer (Steele, Lea and Flood constants).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `r` under `master`.
pub fn replica_seed(master: u64, r: u64) -> u64 {
    splitmix64(master ^ splitmix64(r))
}

/// The stream `id` of `seed`.
pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
