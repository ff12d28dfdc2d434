//! Tabular successor representation: closed-form initialization from a
//! uniform-random policy, TD(lambda) learning with eligibility traces,
//! and need-term extraction.
//!
//! The matrix M holds expected discounted future state occupancies:
//! row i, column j estimates how often state j will be visited starting
//! from state i. Under a fixed policy with transition matrix T the exact
//! answer is `(I - gamma * T)^-1`, which doubles as the initializer and
//! as the test oracle for the TD learner.

use crate::envs::Environment;
use crate::error::Result;
use crate::linalg::Matrix;

/// Decaying vector of recently visited states for TD(lambda) credit.
#[derive(Debug, Clone)]
pub struct EligibilityTrace {
    e: Vec<f64>,
}

impl EligibilityTrace {
    pub fn new(state_count: usize) -> Self {
        EligibilityTrace {
            e: vec![0.0; state_count],
        }
    }

    /// Zero the trace; call at every episode start.
    pub fn reset(&mut self) {
        self.e.iter_mut().for_each(|x| *x = 0.0);
    }

    /// e <- gamma * lambda * e + phi(state), with one-hot phi.
    pub fn decay_and_mark(&mut self, gamma: f64, lambda: f64, state: usize) {
        let gl = gamma * lambda;
        self.e.iter_mut().for_each(|x| *x *= gl);
        self.e[state] += 1.0;
    }

    pub fn values(&self) -> &[f64] {
        &self.e
    }
}

/// Tabular successor representation with TD(lambda) learning.
#[derive(Debug, Clone)]
pub struct SrMatrix {
    m: Matrix,
    pub gamma: f64,
    pub lambda: f64,
    /// SR learning rate; callers may anneal it between updates.
    pub alpha: f64,
}

impl SrMatrix {
    /// Build T for the uniform-random policy (probability 1/|A| per
    /// action, invalid moves self-looping, terminal arrivals carrying no
    /// credit) and return M = (I - gamma * T)^-1 by direct solve.
    pub fn init_uniform(
        env: &dyn Environment,
        gamma: f64,
        lambda: f64,
        alpha: f64,
    ) -> Result<Self> {
        let t = uniform_transition_matrix(env);
        Self::from_transition_matrix(&t, gamma, lambda, alpha)
    }

    /// M = (I - gamma * T)^-1 for an arbitrary (sub)stochastic T.
    pub fn from_transition_matrix(
        t: &Matrix,
        gamma: f64,
        lambda: f64,
        alpha: f64,
    ) -> Result<Self> {
        let n = t.rows();
        let mut a = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] -= gamma * t[(i, j)];
            }
        }
        Ok(SrMatrix {
            m: a.inverse()?,
            gamma,
            lambda,
            alpha,
        })
    }

    pub fn zeros(state_count: usize, gamma: f64, lambda: f64, alpha: f64) -> Self {
        SrMatrix {
            m: Matrix::zeros(state_count, state_count),
            gamma,
            lambda,
            alpha,
        }
    }

    pub fn state_count(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.m
    }

    pub fn row(&self, state: usize) -> &[f64] {
        self.m.row(state)
    }

    /// One TD(lambda) step for the observed transition.
    ///
    /// The trace is advanced first (e <- gamma*lambda*e + phi(s)), then
    /// every row is nudged along the outer product of the trace with the
    /// one-step row error phi(s) + gamma * M[s'] - M[s]. The bootstrap
    /// row is dropped on terminal transitions.
    pub fn td_update(
        &mut self,
        trace: &mut EligibilityTrace,
        state: usize,
        next_state: usize,
        terminal: bool,
    ) {
        trace.decay_and_mark(self.gamma, self.lambda, state);
        let n = self.state_count();
        let mut delta_row: Vec<f64> = self.m.row(state).iter().map(|v| -v).collect();
        delta_row[state] += 1.0;
        if !terminal {
            for (d, v) in delta_row.iter_mut().zip(self.m.row(next_state)) {
                *d += self.gamma * v;
            }
        }
        let alpha = self.alpha;
        for (i, &credit) in trace.values().iter().enumerate() {
            if credit == 0.0 {
                continue;
            }
            let scale = alpha * credit;
            let row = self.m.row_mut(i);
            for j in 0..n {
                row[j] += scale * delta_row[j];
            }
        }
    }

    /// Expected discounted future visits to `target` from `from`,
    /// clamped below at zero (entries can dip negative mid-learning).
    pub fn need(&self, from: usize, target: usize) -> f64 {
        self.m[(from, target)].max(0.0)
    }

    /// One row of M reshaped onto a grid as CSV, clamped at zero; used
    /// for the maze heatmaps.
    pub fn grid_csv(&self, state: usize, rows: usize, cols: usize) -> String {
        assert_eq!(rows * cols, self.state_count());
        let mut out = String::new();
        for r in 0..rows {
            let cells: Vec<String> = (0..cols)
                .map(|c| format!("{}", self.need(state, cols * r + c)))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// T for the uniform-random policy over `env`'s dynamics.
pub fn uniform_transition_matrix(env: &dyn Environment) -> Matrix {
    let per_action = 1.0 / env.action_count() as f64;
    transition_matrix(env, |_, _| per_action)
}

/// T under arbitrary action probabilities `prob(state, action)`.
///
/// Terminal arrivals contribute no successor mass, matching the TD
/// learner's terminal handling.
pub fn transition_matrix<F>(env: &dyn Environment, prob: F) -> Matrix
where
    F: Fn(usize, usize) -> f64,
{
    let n = env.state_count();
    let mut t = Matrix::zeros(n, n);
    for s in 0..n {
        for a in 0..env.action_count() {
            let p = prob(s, a);
            if p == 0.0 {
                continue;
            }
            let (next, terminal) = env.transition(s, a);
            if !terminal {
                t[(s, next)] += p;
            }
        }
    }
    t
}
