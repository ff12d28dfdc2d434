use rand_chacha::ChaCha8Rng;

use crate::agents::{epsilon_greedy, DeterministicModel, QTable, TieBreak};
use crate::envs::Environment;
use crate::error::Result;
use crate::linalg::Matrix;
use crate::replay::MaxPriorityQueue;
use crate::sr::{EligibilityTrace, SrMatrix};

/// Hyperparameters for prioritized sweeping, with and without need.
#[derive(Debug, Clone, Copy)]
pub struct SweepingConfig {
    pub gamma: f64,
    pub q_step: f64,
    pub epsilon: f64,
    /// Planning backups per real step.
    pub plan_steps: usize,
    /// Priorities at or below this never enter the queue.
    pub queue_threshold: f64,
    pub lambda: f64,
    pub sr_step: f64,
    pub tie_break: TieBreak,
}

impl Default for SweepingConfig {
    fn default() -> Self {
        SweepingConfig {
            gamma: 0.95,
            q_step: 0.1,
            epsilon: 0.05,
            plan_steps: 5,
            queue_threshold: 1e-4,
            lambda: 0.5,
            sr_step: 0.1,
            tie_break: TieBreak::Random,
        }
    }
}

/// What one episode produced.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeRecord {
    pub steps: u64,
    pub undiscounted_return: f64,
    pub q_updates: u64,
    /// Wall-clock duration of the episode; informational only and never
    /// written to CSV (outputs stay byte-deterministic).
    pub wall_time_ns: u64,
}

/// Dyna-style prioritized sweeping. Without an SR the planning queue
/// pops by raw priority; with one it pops by priority times the need of
/// the entry's state as seen from the state the agent just acted from.
#[derive(Debug, Clone)]
pub struct SweepingAgent {
    pub q: QTable,
    model: DeterministicModel,
    queue: MaxPriorityQueue,
    need: Option<(SrMatrix, EligibilityTrace)>,
    cfg: SweepingConfig,
}

impl SweepingAgent {
    /// Plain prioritized sweeping.
    pub fn prioritized_sweeping(
        state_count: usize,
        action_count: usize,
        cfg: SweepingConfig,
    ) -> Self {
        SweepingAgent {
            q: QTable::zeros(state_count, action_count, cfg.q_step, cfg.gamma),
            model: DeterministicModel::new(),
            queue: MaxPriorityQueue::new(),
            need: None,
            cfg,
        }
    }

    /// Need-weighted sweeping; the SR starts at the uniform-random-policy
    /// closed form and keeps learning by TD(lambda) on real steps.
    pub fn with_need(env: &dyn Environment, cfg: SweepingConfig) -> Result<Self> {
        let sr = SrMatrix::init_uniform(env, cfg.gamma, cfg.lambda, cfg.sr_step)?;
        Ok(Self::with_need_matrix(env, sr, cfg))
    }

    /// Need-weighted sweeping over a caller-supplied SR matrix.
    pub fn with_need_matrix(env: &dyn Environment, sr: SrMatrix, cfg: SweepingConfig) -> Self {
        let trace = EligibilityTrace::new(env.state_count());
        SweepingAgent {
            q: QTable::zeros(env.state_count(), env.action_count(), cfg.q_step, cfg.gamma),
            model: DeterministicModel::new(),
            queue: MaxPriorityQueue::new(),
            need: Some((sr, trace)),
            cfg,
        }
    }

    pub fn uses_need(&self) -> bool {
        self.need.is_some()
    }

    pub fn sr(&self) -> Option<&SrMatrix> {
        self.need.as_ref().map(|(sr, _)| sr)
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// One real step plus up to `plan_steps` planning backups.
    ///
    /// Returns `(outcome, q_updates)`; the episode is over when the
    /// outcome is terminal.
    pub fn step(
        &mut self,
        env: &mut dyn Environment,
        rng: &mut ChaCha8Rng,
    ) -> Result<(crate::envs::StepOutcome, u64)> {
        let state = env.current_state();
        let action = epsilon_greedy(
            self.q.action_values(state),
            self.cfg.epsilon,
            self.cfg.tie_break,
            rng,
        );
        let out = env.step(action, rng)?;

        if let Some((sr, trace)) = &mut self.need {
            sr.td_update(trace, state, out.next_state, out.terminal);
        }
        self.model
            .record(state, action, out.reward, out.next_state, out.terminal);

        let priority = self
            .q
            .td_error(state, action, out.reward, out.next_state, out.terminal)
            .abs();
        if priority > self.cfg.queue_threshold {
            self.queue.insert((state, action), priority)?;
        }

        // Need is measured from the state the agent acted from this step,
        // held fixed across the step's planning pops.
        let need_ref = state;
        let mut q_updates = 0;
        for _ in 0..self.cfg.plan_steps {
            if self.queue.is_empty() {
                break;
            }
            let entry = match &self.need {
                Some((sr, _)) => self
                    .queue
                    .pop_best(|e| e.priority * sr.need(need_ref, e.state))?,
                None => self.queue.pop_best(|e| e.priority)?,
            };
            let (reward, next, terminal) = self
                .model
                .lookup(entry.state, entry.action)
                .expect("queued pairs are always in the model");
            self.q
                .backup(entry.state, entry.action, reward, next, terminal);
            q_updates += 1;

            let predecessors: Vec<(usize, usize)> =
                self.model.predecessors(entry.state).collect();
            for (ps, pa) in predecessors {
                let (pr, pnext, pterm) = self.model.lookup(ps, pa).unwrap();
                debug_assert_eq!(pnext, entry.state);
                let p = self.q.td_error(ps, pa, pr, pnext, pterm).abs();
                if p > self.cfg.queue_threshold {
                    self.queue.insert((ps, pa), p)?;
                }
            }
        }
        Ok((out, q_updates))
    }

    /// Run one episode to termination.
    pub fn run_episode(
        &mut self,
        env: &mut dyn Environment,
        rng: &mut ChaCha8Rng,
    ) -> Result<EpisodeRecord> {
        let started = std::time::Instant::now();
        env.reset();
        if let Some((_, trace)) = &mut self.need {
            trace.reset();
        }
        let mut record = EpisodeRecord {
            steps: 0,
            undiscounted_return: 0.0,
            q_updates: 0,
            wall_time_ns: 0,
        };
        loop {
            let (out, updates) = self.step(env, rng)?;
            record.steps += 1;
            record.undiscounted_return += out.reward;
            record.q_updates += updates;
            if out.terminal {
                record.wall_time_ns = started.elapsed().as_nanos() as u64;
                return Ok(record);
            }
        }
    }
}

/// An all-ones need matrix degrades the need-weighted scorer to the plain
/// priority argmax; used by the reduction test and available to callers.
pub fn all_ones_sr(state_count: usize, gamma: f64) -> SrMatrix {
    let mut m = Matrix::zeros(state_count, state_count);
    for i in 0..state_count {
        for j in 0..state_count {
            m[(i, j)] = 1.0;
        }
    }
    let mut sr = SrMatrix::zeros(state_count, gamma, 0.0, 0.0);
    *sr.matrix_mut() = m;
    sr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::DynaMaze;
    use crate::seeded_rng;

    #[test]
    fn zero_td_error_queues_nothing() {
        let mut env = DynaMaze::standard();
        let mut agent =
            SweepingAgent::prioritized_sweeping(54, 4, SweepingConfig::default());
        let mut rng = seeded_rng(0);
        env.reset();
        let (out, updates) = agent.step(&mut env, &mut rng).unwrap();
        assert!(!out.terminal);
        assert_eq!(updates, 0);
        assert_eq!(agent.queue_len(), 0);
    }

    #[test]
    fn goal_reward_triggers_planning() {
        let mut env = DynaMaze::standard();
        let mut agent =
            SweepingAgent::prioritized_sweeping(54, 4, SweepingConfig::default());
        let mut rng = seeded_rng(1);
        let rec = agent.run_episode(&mut env, &mut rng).unwrap();
        // the goal entry got priority ~1, planning popped it and spread
        // value to its predecessors
        assert!(rec.q_updates > 0);
        let pre_goal = env.state_id((1, 8));
        assert!(agent.q.max_value(pre_goal) > 0.0);
    }

    #[test]
    fn ps_and_ps_sr_identical_under_all_ones_need() {
        let cfg = SweepingConfig {
            sr_step: 0.0, // keep the all-ones matrix frozen
            ..SweepingConfig::default()
        };
        let env = DynaMaze::standard();
        let mut ps = SweepingAgent::prioritized_sweeping(54, 4, cfg);
        let mut ps_sr =
            SweepingAgent::with_need_matrix(&env, all_ones_sr(54, cfg.gamma), cfg);

        for seed in [3u64, 4, 5] {
            let mut env_a = DynaMaze::standard();
            let mut env_b = DynaMaze::standard();
            let mut rng_a = seeded_rng(seed);
            let mut rng_b = seeded_rng(seed);
            let rec_a = ps.run_episode(&mut env_a, &mut rng_a).unwrap();
            let rec_b = ps_sr.run_episode(&mut env_b, &mut rng_b).unwrap();
            assert_eq!(rec_a.steps, rec_b.steps);
            assert_eq!(rec_a.q_updates, rec_b.q_updates);
            assert_eq!(rec_a.undiscounted_return, rec_b.undiscounted_return);
        }
        // Q tables agree entirely
        for s in 0..54 {
            for a in 0..4 {
                assert_eq!(ps.q.value(s, a), ps_sr.q.value(s, a));
            }
        }
    }

    #[test]
    fn ps_sr_converges_faster_early_on_the_maze() {
        // small-scale version of the benchmark comparison
        let trials = 6;
        let episodes = 12;
        let mut ps_total = 0.0;
        let mut sr_total = 0.0;
        for trial in 0..trials {
            let cfg = SweepingConfig::default();
            let mut env_a = DynaMaze::standard();
            let mut env_b = DynaMaze::standard();
            let mut ps = SweepingAgent::prioritized_sweeping(54, 4, cfg);
            let mut ps_sr = SweepingAgent::with_need(&env_b, cfg).unwrap();
            let mut rng_a = seeded_rng(100 + trial);
            let mut rng_b = seeded_rng(100 + trial);
            for ep in 0..episodes {
                let a = ps.run_episode(&mut env_a, &mut rng_a).unwrap();
                let b = ps_sr.run_episode(&mut env_b, &mut rng_b).unwrap();
                if ep >= 2 {
                    ps_total += a.steps as f64;
                    sr_total += b.steps as f64;
                }
            }
        }
        assert!(
            sr_total < ps_total,
            "need-weighted sweeping should learn faster: {sr_total} vs {ps_total}"
        );
    }
}
