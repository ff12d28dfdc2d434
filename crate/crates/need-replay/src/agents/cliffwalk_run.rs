use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{epsilon_greedy, LinearQ, TieBreak};
use crate::envs::{cliffwalk_ground_truth_q, BlindCliffwalk, Environment, FallConvention};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::replay::{ProportionalSampler, Transition};
use crate::sr::{transition_matrix, EligibilityTrace, SrMatrix};

/// The six replay orderings compared on the Blind Cliffwalk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CliffwalkScheme {
    /// Every stored transition equally likely (prioritization exponent 0).
    Uniform,
    /// Proportional prioritization on |TD-error|.
    Per,
    /// Priorities multiplied by need terms from a TD(lambda)-learned SR.
    Need,
    /// Need terms frozen at the uniform-random-policy closed form.
    RandomNeed,
    /// Need terms from the closed form of the current greedy policy.
    OptimalNeed,
    /// Hindsight: always apply the largest possible Q-update.
    Oracle,
}

impl CliffwalkScheme {
    pub const ALL: [CliffwalkScheme; 6] = [
        CliffwalkScheme::Uniform,
        CliffwalkScheme::Per,
        CliffwalkScheme::Need,
        CliffwalkScheme::RandomNeed,
        CliffwalkScheme::OptimalNeed,
        CliffwalkScheme::Oracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CliffwalkScheme::Uniform => "uniform",
            CliffwalkScheme::Per => "per",
            CliffwalkScheme::Need => "need",
            CliffwalkScheme::RandomNeed => "random_need",
            CliffwalkScheme::OptimalNeed => "optimal_need",
            CliffwalkScheme::Oracle => "oracle",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::config("scheme", format!("unknown scheme `{name}`")))
    }

    fn uses_need(&self) -> bool {
        matches!(
            self,
            CliffwalkScheme::Need | CliffwalkScheme::RandomNeed | CliffwalkScheme::OptimalNeed
        )
    }
}

/// Cliffwalk benchmark hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct CliffwalkConfig {
    pub gamma: f64,
    pub q_step: f64,
    /// Prioritization exponent for the non-uniform schemes.
    pub alpha: f64,
    /// TD(lambda) for the learned-need scheme.
    pub lambda: f64,
    pub sr_step: f64,
    /// Exploration of the behaviour policy that drives the need reference.
    pub epsilon: f64,
    pub mse_threshold: f64,
    pub update_budget: u64,
    pub convention: FallConvention,
}

impl Default for CliffwalkConfig {
    fn default() -> Self {
        CliffwalkConfig {
            gamma: 0.9,
            q_step: 0.25,
            alpha: 0.6,
            lambda: 0.95,
            sr_step: 0.1,
            epsilon: 0.1,
            mse_threshold: 1e-3,
            update_budget: 10_000_000,
            convention: FallConvention::Terminate,
        }
    }
}

/// Result of one cliffwalk run: Q-updates applied until the value
/// estimate reached the ground truth, or the budget if it never did.
#[derive(Debug, Clone, Copy)]
pub struct CliffwalkOutcome {
    pub q_updates: u64,
    pub converged: bool,
}

/// Replay buffer bucketed by start state.
///
/// The need-weighted sampling probability factors as
/// `(p_j * need(s_j))^alpha = p_j^alpha * need(s_j)^alpha`, so grouping
/// entries by state and keeping one sum tree of `p^alpha` per bucket
/// computes the same distribution as a literal sweep over the buffer in
/// O(states + log N) per draw.
pub struct BucketedBuffer {
    transitions: Vec<Transition<usize>>,
    /// (bucket state, leaf index) for every stored transition.
    slots: Vec<(usize, usize)>,
    /// Global index of each bucket leaf.
    members: Vec<Vec<usize>>,
    trees: Vec<ProportionalSampler>,
}

impl BucketedBuffer {
    /// Exhaustively play all 2^n action sequences from the start state
    /// and store every transition visited, each with priority 1.
    pub fn prefill(n: usize, convention: FallConvention, alpha: f64) -> Self {
        let env = BlindCliffwalk::with_convention(n, convention);
        let mut transitions = Vec::new();
        for sequence in 0u64..(1 << n) {
            let mut state = 0usize;
            for bit in 0..n {
                let action = ((sequence >> bit) & 1) as usize;
                let reward = env.reward(state, action);
                let (next, terminal) = env.transition(state, action);
                let mut t = Transition::new(state, action, reward, next, terminal);
                t.priority = 1.0;
                transitions.push(t);
                if terminal {
                    break;
                }
                state = next;
            }
        }
        Self::from_transitions(n, transitions, alpha)
    }

    pub fn from_transitions(
        n: usize,
        transitions: Vec<Transition<usize>>,
        alpha: f64,
    ) -> Self {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, t) in transitions.iter().enumerate() {
            members[t.state].push(i);
        }
        let mut trees = Vec::with_capacity(n);
        let mut slots = vec![(0usize, 0usize); transitions.len()];
        for (state, m) in members.iter().enumerate() {
            let mut tree =
                ProportionalSampler::new(m.len().max(1), alpha).with_priority_floor(1e-8);
            for (leaf, &global) in m.iter().enumerate() {
                tree.push(transitions[global].priority).unwrap();
                slots[global] = (state, leaf);
            }
            trees.push(tree);
        }
        BucketedBuffer {
            transitions,
            slots,
            members,
            trees,
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn get(&self, index: usize) -> &Transition<usize> {
        &self.transitions[index]
    }

    pub fn set_priority(&mut self, index: usize, priority: f64) -> Result<()> {
        let (state, leaf) = self.slots[index];
        self.transitions[index].priority = priority;
        self.trees[state].update(leaf, priority)
    }

    /// Sample a transition index under bucket weights `state_weight`.
    ///
    /// Passing all-ones weights reproduces plain proportional sampling;
    /// `need^alpha` weights reproduce the need-weighted distribution.
    pub fn sample_weighted(
        &self,
        state_weight: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Result<usize> {
        let mut total = 0.0;
        for (tree, &w) in self.trees.iter().zip(state_weight) {
            total += w * tree.total_mass();
        }
        if total <= 0.0 {
            return Err(Error::NoMass);
        }
        let mut u = rng.gen::<f64>() * total;
        let mut chosen = None;
        for (state, (tree, &w)) in self.trees.iter().zip(state_weight).enumerate() {
            let bucket_mass = w * tree.total_mass();
            if bucket_mass <= 0.0 {
                continue;
            }
            chosen = Some(state); // fallback for floating-point overshoot
            if u < bucket_mass {
                break;
            }
            u -= bucket_mass;
        }
        let state = chosen.ok_or(Error::NoMass)?;
        let leaf = self.trees[state].sample(rng)?;
        Ok(self.members[state][leaf])
    }

    /// The exact probability of each stored transition under the given
    /// bucket weights; the literal form of the need-weighted rule, used
    /// to cross-check the bucketed sampler.
    pub fn exact_probabilities(&self, state_weight: &[f64]) -> Vec<f64> {
        let mut mass = vec![0.0; self.len()];
        let mut total = 0.0;
        for (i, &(state, leaf)) in self.slots.iter().enumerate() {
            let m = state_weight[state] * self.trees[state].leaf_mass(leaf);
            mass[i] = m;
            total += m;
        }
        if total > 0.0 {
            for m in &mut mass {
                *m /= total;
            }
        }
        mass
    }
}

/// Run one replay scheme on the n-state cliffwalk until the linear Q
/// estimate matches the ground truth (MSE below threshold) and report
/// how many Q-updates that took.
///
/// The buffer is filled by enumerating all 2^n action sequences before
/// learning starts and never grows afterwards; Q learns exclusively from
/// replay. The agent still walks the environment epsilon-greedily: its
/// latest pre-action state is the reference point for the need terms,
/// and for the learned-need scheme the SR re-experiences each replayed
/// transition through TD(lambda).
pub fn cliffwalk_run(
    scheme: CliffwalkScheme,
    n: usize,
    seed: u64,
    cfg: &CliffwalkConfig,
) -> Result<CliffwalkOutcome> {
    assert!((2..=20).contains(&n), "state counts 2..=20 supported");
    let truth = cliffwalk_ground_truth_q(n, cfg.gamma, cfg.convention);
    if scheme == CliffwalkScheme::Oracle {
        return Ok(oracle_run(n, cfg, &truth));
    }

    let mut rng = crate::seeded_rng(seed);
    let mut env = BlindCliffwalk::with_convention(n, cfg.convention);
    let mut q = LinearQ::zeros(n, 2, cfg.gamma);
    let alpha = if scheme == CliffwalkScheme::Uniform {
        0.0
    } else {
        cfg.alpha
    };
    let mut buffer = BucketedBuffer::prefill(n, cfg.convention, alpha);

    // need machinery
    let uniform_t = uniform_cliffwalk_t(&env);
    let mut learned_sr = SrMatrix::from_transition_matrix(
        &uniform_t,
        cfg.gamma,
        cfg.lambda,
        cfg.sr_step,
    )?;
    let random_sr = learned_sr.clone();
    let mut trace = EligibilityTrace::new(n);
    let mut greedy: Vec<usize> = (0..n).map(|s| q.greedy_action(s)).collect();
    let mut optimal_sr = greedy_sr(&env, &greedy, cfg.gamma)?;

    let mut weights = vec![1.0; n];
    let mut q_updates = 0u64;
    env.reset();
    loop {
        // one real step; learning stays replay-only
        let state = env.current_state();
        let action = epsilon_greedy(
            &[q.value(state, 0), q.value(state, 1)],
            cfg.epsilon,
            TieBreak::LowestId,
            &mut rng,
        );
        env.step(action, &mut rng)?;

        // one replay-driven Q-update per real step
        if scheme.uses_need() {
            let sr = match scheme {
                CliffwalkScheme::Need => &learned_sr,
                CliffwalkScheme::RandomNeed => &random_sr,
                CliffwalkScheme::OptimalNeed => {
                    let fresh: Vec<usize> = (0..n).map(|s| q.greedy_action(s)).collect();
                    if fresh != greedy {
                        greedy = fresh;
                        optimal_sr = greedy_sr(&env, &greedy, cfg.gamma)?;
                    }
                    &optimal_sr
                }
                _ => unreachable!(),
            };
            for (s, w) in weights.iter_mut().enumerate() {
                *w = sr.need(state, s).powf(cfg.alpha);
            }
        } else {
            weights.iter_mut().for_each(|w| *w = 1.0);
        }
        let index = buffer.sample_weighted(&weights, &mut rng)?;
        let t = buffer.get(index).clone();
        let delta = q.td_error(t.state, t.action, t.reward, t.next_state, t.terminal);
        q.nudge(t.state, t.action, cfg.q_step * delta);
        buffer.set_priority(index, delta.abs())?;
        q_updates += 1;

        if scheme == CliffwalkScheme::Need {
            // SR re-experiences the replayed transition
            learned_sr.td_update(&mut trace, t.state, t.next_state, t.terminal);
            if t.terminal {
                trace.reset();
            }
        }

        if q.mse_against(&truth) < cfg.mse_threshold {
            return Ok(CliffwalkOutcome {
                q_updates,
                converged: true,
            });
        }
        if q_updates >= cfg.update_budget {
            return Ok(CliffwalkOutcome {
                q_updates,
                converged: false,
            });
        }
    }
}

/// Hindsight baseline: evaluate every (state, action) pair against the
/// true model and always apply the largest update. Deterministic, and a
/// lower bound on the Q-updates any replay ordering needs.
fn oracle_run(n: usize, cfg: &CliffwalkConfig, truth: &Matrix) -> CliffwalkOutcome {
    let env = BlindCliffwalk::with_convention(n, cfg.convention);
    let mut q = LinearQ::zeros(n, 2, cfg.gamma);
    let mut q_updates = 0u64;
    loop {
        let mut best = (0usize, 0usize);
        let mut best_mag = -1.0;
        for s in 0..n {
            for a in 0..2 {
                let (next, terminal) = env.transition(s, a);
                let delta = q.td_error(s, a, env.reward(s, a), next, terminal);
                if delta.abs() > best_mag {
                    best_mag = delta.abs();
                    best = (s, a);
                }
            }
        }
        let (s, a) = best;
        let (next, terminal) = env.transition(s, a);
        let delta = q.td_error(s, a, env.reward(s, a), next, terminal);
        q.nudge(s, a, cfg.q_step * delta);
        q_updates += 1;
        if q.mse_against(truth) < cfg.mse_threshold {
            return CliffwalkOutcome {
                q_updates,
                converged: true,
            };
        }
        if q_updates >= cfg.update_budget {
            return CliffwalkOutcome {
                q_updates,
                converged: false,
            };
        }
    }
}

fn uniform_cliffwalk_t(env: &BlindCliffwalk) -> Matrix {
    transition_matrix(env, |_, _| 0.5)
}

fn greedy_sr(env: &BlindCliffwalk, greedy: &[usize], gamma: f64) -> Result<SrMatrix> {
    let t = transition_matrix(env, |s, a| if greedy[s] == a { 1.0 } else { 0.0 });
    SrMatrix::from_transition_matrix(&t, gamma, 0.0, 0.0)
}
