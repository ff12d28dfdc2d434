//! The two benchmark environments behind one episodic interface, plus the
//! ground-truth oracles their tests and baselines rely on.

mod cliffwalk;
mod maze;

pub use cliffwalk::{cliffwalk_ground_truth_q, BlindCliffwalk, FallConvention};
pub use maze::DynaMaze;

use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Outcome of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: usize,
    pub reward: f64,
    pub terminal: bool,
}

/// A finite episodic environment with integer states and actions.
///
/// `step` advances the tracked current state and is a pure function of
/// `(current_state, action, rng)`. `transition` exposes the underlying
/// deterministic dynamics without touching state or rewards; model-based
/// code and the successor-representation initializer build on it.
pub trait Environment {
    fn state_count(&self) -> usize;
    fn action_count(&self) -> usize;
    fn start_state(&self) -> usize;
    fn current_state(&self) -> usize;

    /// Reset to the start state and return its id.
    fn reset(&mut self) -> usize;

    /// Take `action` from the current state.
    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> Result<StepOutcome>;

    /// Deterministic dynamics: `(next_state, arrival_is_terminal)`.
    ///
    /// A terminal arrival ends the episode; the next state carries no
    /// successor-occupancy credit. States that can never be occupied
    /// (walls) self-loop.
    fn transition(&self, state: usize, action: usize) -> (usize, bool);
}
