//! Multi-UAV semantic video streaming: a downlink simulator with Rician
//! fading, an EMA vector-quantized token codec, token-drop bitrate control,
//! sliding-window loss recovery, a QoE model, and a multi-user PPO trainer
//! that allocates trajectories, transmit powers and bitrates.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod harness;
pub mod nn;
pub mod ppo;
pub mod qoe;
pub mod recovery;
pub mod sim;
pub mod stream;
pub mod vq;

pub use error::{Error, Result};

use rand_chacha::ChaCha8Rng;

/// The seeded random stream used everywhere in the crate.
pub type SimRng = ChaCha8Rng;

/// Builds a [`SimRng`] from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}
