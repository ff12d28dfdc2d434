//! Need-based prioritization of experience replay via the successor
//! representation.
//!
//! Classic prioritized replay ranks experiences by how surprising they
//! were (TD-error, the "gain"). This crate adds the complementary
//! "need" term: how often the agent expects to revisit an experience's
//! state, read out of the successor representation. It ships:
//!
//! - replay primitives (sum-tree sampler, dedup max-priority queue),
//! - the Dyna maze and Blind Cliffwalk benchmark environments,
//! - tabular SR with TD(lambda) learning and a linear-approximation SR
//!   with analytic gradients,
//! - prioritized sweeping with and without need (PS / PS-SR), the six
//!   cliffwalk replay schemes, and need-modulated PER (PER-SR),
//! - a seeded, reproducible experiment harness emitting CSV.
//!
//! The book under `book/` walks through the concepts; `need-replay-cli`
//! exposes the experiments as subcommands.

pub mod agents;
pub mod approx;
pub mod envs;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod replay;
pub mod sr;
pub mod stats;

pub use error::{Error, Result};

/// The deterministic RNG used throughout; identical seeds give identical
/// runs on every platform.
pub type Rng = rand_chacha::ChaCha8Rng;

/// A fresh deterministic generator for `seed`.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
