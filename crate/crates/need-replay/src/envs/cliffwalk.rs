use rand_chacha::ChaCha8Rng;

use crate::envs::{Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Action 0 advances one state to the right; action 1 falls off the cliff.
pub const RIGHT: usize = 0;
pub const WRONG: usize = 1;

/// What a fall does to the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum FallConvention {
    /// The fall ends the episode with reward 0; the next episode starts
    /// fresh at state 0. Ground-truth Q(s, wrong) is 0 everywhere.
    #[default]
    Terminate,
    /// The fall is an ordinary transition back to state 0. Ground-truth
    /// Q(s, wrong) becomes gamma^n.
    RestartNonterminal,
}

/// The Blind Cliffwalk: an n-state chain where only the full sequence of
/// correct actions earns the terminal reward of 1.
#[derive(Debug, Clone)]
pub struct BlindCliffwalk {
    n: usize,
    convention: FallConvention,
    current: usize,
}

impl BlindCliffwalk {
    pub fn new(n: usize) -> Self {
        BlindCliffwalk::with_convention(n, FallConvention::Terminate)
    }

    pub fn with_convention(n: usize, convention: FallConvention) -> Self {
        assert!(n >= 2, "need at least two states");
        BlindCliffwalk {
            n,
            convention,
            current: 0,
        }
    }

    pub fn convention(&self) -> FallConvention {
        self.convention
    }

    /// Reward carried by the deterministic transition `(state, action)`.
    pub fn reward(&self, state: usize, action: usize) -> f64 {
        if action == RIGHT && state == self.n - 1 {
            1.0
        } else {
            0.0
        }
    }
}

impl Environment for BlindCliffwalk {
    fn state_count(&self) -> usize {
        self.n
    }

    fn action_count(&self) -> usize {
        2
    }

    fn start_state(&self) -> usize {
        0
    }

    fn current_state(&self) -> usize {
        self.current
    }

    fn reset(&mut self) -> usize {
        self.current = 0;
        0
    }

    fn step(&mut self, action: usize, _rng: &mut ChaCha8Rng) -> Result<StepOutcome> {
        if action >= 2 {
            return Err(Error::InvalidAction { action, count: 2 });
        }
        let reward = self.reward(self.current, action);
        let (next, terminal) = self.transition(self.current, action);
        self.current = if terminal { 0 } else { next };
        Ok(StepOutcome {
            next_state: next,
            reward,
            terminal,
        })
    }

    fn transition(&self, state: usize, action: usize) -> (usize, bool) {
        match (action, self.convention) {
            (RIGHT, _) if state == self.n - 1 => (state, true),
            (RIGHT, _) => (state + 1, false),
            (_, FallConvention::Terminate) => (0, true),
            (_, FallConvention::RestartNonterminal) => (0, false),
        }
    }
}

/// Closed-form optimal action values for the cliffwalk.
///
/// Under the terminating fall, Q*(s_k, right) = gamma^(n-1-k) and
/// Q*(s_k, wrong) = 0; with non-terminal falls the wrong action instead
/// inherits the discounted start-state value gamma^n. Both forms satisfy
/// the Bellman optimality equation exactly.
pub fn cliffwalk_ground_truth_q(n: usize, gamma: f64, convention: FallConvention) -> Matrix {
    assert!(n >= 2 && gamma > 0.0 && gamma < 1.0);
    let mut q = Matrix::zeros(n, 2);
    for k in 0..n {
        q[(k, RIGHT)] = gamma.powi((n - 1 - k) as i32);
        q[(k, WRONG)] = match convention {
            FallConvention::Terminate => 0.0,
            FallConvention::RestartNonterminal => gamma.powi(n as i32),
        };
    }
    q
}
