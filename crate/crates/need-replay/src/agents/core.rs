use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;

/// How greedy action selection resolves exact ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Deterministic: the smallest action id wins.
    #[default]
    LowestId,
    /// Uniform among the tied maximizers. A zero-initialized Q table
    /// needs this on the maze: under LowestId the agent drifts into the
    /// same border forever and the first episode never ends.
    Random,
}

/// Tabular action values.
#[derive(Debug, Clone)]
pub struct QTable {
    q: Matrix,
    pub step_size: f64,
    pub gamma: f64,
}

impl QTable {
    pub fn zeros(state_count: usize, action_count: usize, step_size: f64, gamma: f64) -> Self {
        QTable {
            q: Matrix::zeros(state_count, action_count),
            step_size,
            gamma,
        }
    }

    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.q[(state, action)]
    }

    pub fn action_values(&self, state: usize) -> &[f64] {
        self.q.row(state)
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.q.row(state).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn greedy_action(&self, state: usize) -> usize {
        argmax_lowest(self.q.row(state))
    }

    /// One Q-learning backup; the bootstrap is dropped on terminal
    /// transitions. Returns the TD-error.
    pub fn backup(&mut self, state: usize, action: usize, reward: f64, next_state: usize, terminal: bool) -> f64 {
        let delta = self.td_error(state, action, reward, next_state, terminal);
        self.q[(state, action)] += self.step_size * delta;
        delta
    }

    pub fn td_error(&self, state: usize, action: usize, reward: f64, next_state: usize, terminal: bool) -> f64 {
        let bootstrap = if terminal { 0.0 } else { self.max_value(next_state) };
        reward + self.gamma * bootstrap - self.q[(state, action)]
    }
}

/// Linear action values over one-hot (state, action) features: one
/// parameter per pair, and the gradient of Q(s, a) in theta is exactly
/// that pair's one-hot feature.
#[derive(Debug, Clone)]
pub struct LinearQ {
    theta: Vec<f64>,
    state_count: usize,
    action_count: usize,
    pub gamma: f64,
}

impl LinearQ {
    pub fn zeros(state_count: usize, action_count: usize, gamma: f64) -> Self {
        LinearQ {
            theta: vec![0.0; state_count * action_count],
            state_count,
            action_count,
            gamma,
        }
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    fn idx(&self, state: usize, action: usize) -> usize {
        state * self.action_count + action
    }

    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.theta[self.idx(state, action)]
    }

    pub fn max_value(&self, state: usize) -> f64 {
        (0..self.action_count)
            .map(|a| self.value(state, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn greedy_action(&self, state: usize) -> usize {
        let vals: Vec<f64> = (0..self.action_count).map(|a| self.value(state, a)).collect();
        argmax_lowest(&vals)
    }

    pub fn td_error(&self, state: usize, action: usize, reward: f64, next_state: usize, terminal: bool) -> f64 {
        let bootstrap = if terminal { 0.0 } else { self.max_value(next_state) };
        reward + self.gamma * bootstrap - self.value(state, action)
    }

    /// theta[s, a] += amount (the one-hot gradient folds to one entry).
    pub fn nudge(&mut self, state: usize, action: usize, amount: f64) {
        let i = self.idx(state, action);
        self.theta[i] += amount;
    }

    /// Mean squared error against a reference |S| x |A| table.
    pub fn mse_against(&self, reference: &Matrix) -> f64 {
        let mut acc = 0.0;
        for s in 0..self.state_count {
            for a in 0..self.action_count {
                let d = self.value(s, a) - reference[(s, a)];
                acc += d * d;
            }
        }
        acc / (self.state_count * self.action_count) as f64
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy action selection over a slice of action values.
///
/// With probability epsilon a uniform action; otherwise the greedy
/// action with ties resolved per `tie_break`.
pub fn epsilon_greedy(
    values: &[f64],
    epsilon: f64,
    tie_break: TieBreak,
    rng: &mut ChaCha8Rng,
) -> usize {
    let n = values.len();
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..n);
    }
    match tie_break {
        TieBreak::LowestId => argmax_lowest(values),
        TieBreak::Random => {
            let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let tied: Vec<usize> = (0..n).filter(|&i| values[i] == best).collect();
            if tied.len() == 1 {
                tied[0]
            } else {
                tied[rng.gen_range(0..tied.len())]
            }
        }
    }
}

/// Deterministic one-step model with a reverse index for predecessor
/// sweeps: which (state, action) pairs are predicted to lead to a state.
#[derive(Debug, Default, Clone)]
pub struct DeterministicModel {
    forward: BTreeMap<(usize, usize), (f64, usize, bool)>,
    reverse: BTreeMap<usize, BTreeSet<(usize, usize)>>,
}

impl DeterministicModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, state: usize, action: usize, reward: f64, next_state: usize, terminal: bool) {
        let key = (state, action);
        if let Some(&(_, old_next, _)) = self.forward.get(&key) {
            if old_next != next_state {
                if let Some(set) = self.reverse.get_mut(&old_next) {
                    set.remove(&key);
                }
            }
        }
        self.forward.insert(key, (reward, next_state, terminal));
        self.reverse.entry(next_state).or_default().insert(key);
    }

    pub fn lookup(&self, state: usize, action: usize) -> Option<(f64, usize, bool)> {
        self.forward.get(&(state, action)).copied()
    }

    /// All (state, action) pairs predicted to lead to `state`.
    pub fn predecessors(&self, state: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.reverse.get(&state).into_iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Reverse index agrees with the forward map (test support).
    pub fn reverse_index_consistent(&self) -> bool {
        let forward_ok = self.forward.iter().all(|(&key, &(_, next, _))| {
            self.reverse.get(&next).is_some_and(|set| set.contains(&key))
        });
        let reverse_ok = self.reverse.iter().all(|(&next, set)| {
            set.iter().all(|key| {
                self.forward.get(key).is_some_and(|&(_, n, _)| n == next)
            })
        });
        forward_ok && reverse_ok
    }
}
