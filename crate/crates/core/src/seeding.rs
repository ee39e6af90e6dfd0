//! Reproducible random streams.
//!
//! Every random stream is identified by `(master_seed, trajectory_index, tag)`.
//! The three words are folded through the SplitMix64 finalizer into a 64-bit
//! seed for a ChaCha8 generator, so a trajectory's draws depend only on its
//! own index and never on scheduling order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used for every stream in the crate.
pub type StreamRng = ChaCha8Rng;

/// Subordinator increments `ΔS`.
pub const SUBORDINATOR_STREAM: u64 = 0x01;
/// Gaussian mode increments `ΔW_k`.
pub const GAUSSIAN_STREAM: u64 = 0x02;
/// Random initial conditions.
pub const INITIAL_STREAM: u64 = 0x03;
/// Calibration runs (e.g. the Young-inequality constant).
pub const CALIBRATION_STREAM: u64 = 0x04;
/// Bootstrap resampling.
pub const BOOTSTRAP_STREAM: u64 = 0x05;
/// Random test fields for the inequality suite.
pub const FIELD_STREAM: u64 = 0x06;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_seed(master: u64, index: u64, tag: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ index) ^ tag.rotate_left(32))
}

pub fn stream_rng(master: u64, index: u64, tag: u64) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(master, index, tag))
}
