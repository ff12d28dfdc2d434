//! Function-approximation successor representation: an encoder producing
//! features phi(s), a decoder reconstructing the state from phi, and one
//! SR head per action mapping phi to an SR vector m(s, a).
//!
//! The provided instance is linear, which keeps every gradient analytic
//! and testable against finite differences while exercising the same
//! control flow a deep version would. The SR head is trained by a
//! semi-gradient TD rule: the bootstrap operand is a frozen target, the
//! remaining dependence on the parameters is differentiated exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::replay::Transition;

const CHECKPOINT_VERSION: u32 = 1;

/// Losses and flat parameter gradient for one transition.
#[derive(Debug, Clone)]
pub struct SrLossReport {
    /// Reconstruction loss ||s - g(phi(s))||^2.
    pub loss_g: f64,
    /// SR TD loss ||phi + gamma * m_next - m||^2 (bootstrap frozen).
    pub loss_u: f64,
    /// Gradient of loss_g + loss_u over the flat parameter vector.
    pub gradients: Vec<f64>,
}

/// Linear encoder/decoder/SR-head triple.
///
/// Parameters, flattened in this order:
/// encoder (d x D), decoder (D x d), one SR head (d x d) per action.
#[derive(Debug, Clone)]
pub struct LinearSr {
    state_dim: usize,
    feature_dim: usize,
    action_count: usize,
    pub gamma: f64,
    /// SGD step size applied by `apply_step`.
    pub step_size: f64,
    /// When set, encoder gradients are zeroed and the encoder stays fixed.
    pub freeze_encoder: bool,
    params: Vec<f64>,
}

impl LinearSr {
    pub fn new(state_dim: usize, feature_dim: usize, action_count: usize, gamma: f64) -> Self {
        let params = vec![0.0; Self::param_len(state_dim, feature_dim, action_count)];
        LinearSr {
            state_dim,
            feature_dim,
            action_count,
            gamma,
            step_size: 0.1,
            freeze_encoder: false,
            params,
        }
    }

    /// Identity encoder/decoder over one-hot states (d = D), frozen
    /// encoder, SR heads zeroed.
    pub fn tabular(state_count: usize, action_count: usize, gamma: f64) -> Self {
        let mut sr = LinearSr::new(state_count, state_count, action_count, gamma);
        sr.freeze_encoder = true;
        for i in 0..state_count {
            sr.params[i * state_count + i] = 1.0; // encoder = I
            let dec = sr.decoder_offset() + i * state_count + i;
            sr.params[dec] = 1.0; // decoder = I
        }
        sr
    }

    /// Install closed-form SR rows `m(s, a) = M[s, :]` for every action.
    pub fn set_heads_from_matrix(&mut self, m: &Matrix) {
        assert_eq!(self.feature_dim, m.rows());
        assert_eq!(self.feature_dim, m.cols());
        for a in 0..self.action_count {
            for row in 0..self.feature_dim {
                for col in 0..self.feature_dim {
                    // head maps phi -> m; with one-hot phi(s), column s
                    // of the head must hold M[s, :]
                    let idx = self.head_offset(a) + row * self.feature_dim + col;
                    self.params[idx] = m[(col, row)];
                }
            }
        }
    }

    fn param_len(state_dim: usize, feature_dim: usize, action_count: usize) -> usize {
        feature_dim * state_dim + state_dim * feature_dim + action_count * feature_dim * feature_dim
    }

    fn decoder_offset(&self) -> usize {
        self.feature_dim * self.state_dim
    }

    fn head_offset(&self, action: usize) -> usize {
        2 * self.feature_dim * self.state_dim + action * self.feature_dim * self.feature_dim
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::ShapeMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// phi(s) = F s.
    pub fn encode(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::ShapeMismatch {
                expected: self.state_dim,
                got: state.len(),
            });
        }
        let mut phi = vec![0.0; self.feature_dim];
        for (i, out) in phi.iter_mut().enumerate() {
            let row = &self.params[i * self.state_dim..(i + 1) * self.state_dim];
            *out = row.iter().zip(state).map(|(w, x)| w * x).sum();
        }
        Ok(phi)
    }

    /// g(phi) = G phi.
    pub fn decode(&self, phi: &[f64]) -> Result<Vec<f64>> {
        if phi.len() != self.feature_dim {
            return Err(Error::ShapeMismatch {
                expected: self.feature_dim,
                got: phi.len(),
            });
        }
        let off = self.decoder_offset();
        let mut out = vec![0.0; self.state_dim];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.params[off + i * self.feature_dim..off + (i + 1) * self.feature_dim];
            *o = row.iter().zip(phi).map(|(w, x)| w * x).sum();
        }
        Ok(out)
    }

    /// m(phi, a) = U_a phi.
    pub fn sr_vector(&self, phi: &[f64], action: usize) -> Result<Vec<f64>> {
        if phi.len() != self.feature_dim {
            return Err(Error::ShapeMismatch {
                expected: self.feature_dim,
                got: phi.len(),
            });
        }
        if action >= self.action_count {
            return Err(Error::InvalidAction {
                action,
                count: self.action_count,
            });
        }
        let off = self.head_offset(action);
        let d = self.feature_dim;
        let mut out = vec![0.0; d];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.params[off + i * d..off + (i + 1) * d];
            *o = row.iter().zip(phi).map(|(w, x)| w * x).sum();
        }
        Ok(out)
    }

    /// The frozen TD target phi_t + gamma * m(phi_{t+1}, a*); the gamma
    /// term is dropped on terminal transitions.
    pub fn bootstrap_target(
        &self,
        transition: &Transition<Vec<f64>>,
        greedy_next_action: usize,
    ) -> Result<Vec<f64>> {
        let phi_t = self.encode(&transition.state)?;
        if transition.terminal {
            return Ok(phi_t);
        }
        let phi_next = self.encode(&transition.next_state)?;
        let m_next = self.sr_vector(&phi_next, greedy_next_action)?;
        Ok(phi_t
            .iter()
            .zip(&m_next)
            .map(|(p, m)| p + self.gamma * m)
            .collect())
    }

    /// Both losses and their analytic gradients for one transition.
    pub fn losses(
        &self,
        transition: &Transition<Vec<f64>>,
        greedy_next_action: usize,
    ) -> Result<SrLossReport> {
        let target = self.bootstrap_target(transition, greedy_next_action)?;
        self.losses_against(transition, &target)
    }

    /// Losses treating `target` as a constant. Finite-difference checks
    /// perturb parameters while holding the target fixed, matching the
    /// semi-gradient the learner applies.
    pub fn losses_against(
        &self,
        transition: &Transition<Vec<f64>>,
        target: &[f64],
    ) -> Result<SrLossReport> {
        if target.len() != self.feature_dim {
            return Err(Error::ShapeMismatch {
                expected: self.feature_dim,
                got: target.len(),
            });
        }
        let s = &transition.state;
        let action = transition.action;
        if action >= self.action_count {
            return Err(Error::InvalidAction {
                action,
                count: self.action_count,
            });
        }
        let phi = self.encode(s)?;
        let recon = self.decode(&phi)?;
        let m = self.sr_vector(&phi, action)?;

        let r_g: Vec<f64> = s.iter().zip(&recon).map(|(x, y)| x - y).collect();
        let loss_g: f64 = r_g.iter().map(|x| x * x).sum();
        // residual of the SR TD loss; target already includes phi_t
        let r_u: Vec<f64> = target.iter().zip(&m).map(|(t, y)| t - y).collect();
        let loss_u: f64 = r_u.iter().map(|x| x * x).sum();

        let d = self.feature_dim;
        let dd = self.state_dim;
        let mut grad = vec![0.0; self.params.len()];

        // decoder: d loss_g / dG = -2 r_g phi^T
        let dec = self.decoder_offset();
        for (i, r) in r_g.iter().enumerate() {
            for (j, p) in phi.iter().enumerate() {
                grad[dec + i * d + j] = -2.0 * r * p;
            }
        }

        // SR head for the taken action: d loss_u / dU_a = -2 r_u phi^T
        let head = self.head_offset(action);
        for i in 0..d {
            for j in 0..d {
                grad[head + i * d + j] = -2.0 * r_u[i] * phi[j];
            }
        }

        if !self.freeze_encoder {
            // d loss / d phi, then chain through phi = F s
            let head_rows = &self.params[head..head + d * d];
            let mut dphi = vec![0.0; d];
            for j in 0..d {
                // from loss_g: -2 G^T r_g
                let mut acc = 0.0;
                for (i, r) in r_g.iter().enumerate() {
                    acc += self.params[dec + i * d + j] * r;
                }
                let mut from_g = -2.0 * acc;
                // from loss_u only the prediction path -U_a phi flows;
                // the phi_t inside the frozen target contributes nothing
                let mut acc_u = 0.0;
                for i in 0..d {
                    acc_u += head_rows[i * d + j] * r_u[i];
                }
                from_g += -2.0 * acc_u;
                dphi[j] = from_g;
            }
            for i in 0..d {
                for k in 0..dd {
                    grad[i * dd + k] = dphi[i] * s[k];
                }
            }
        }

        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        Ok(SrLossReport {
            loss_g,
            loss_u,
            gradients: grad,
        })
    }

    /// params <- params - step_size * gradients.
    pub fn apply_step(&mut self, gradients: &[f64]) -> Result<()> {
        if gradients.len() != self.params.len() {
            return Err(Error::ShapeMismatch {
                expected: self.params.len(),
                got: gradients.len(),
            });
        }
        if gradients.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        for (p, g) in self.params.iter_mut().zip(gradients) {
            *p -= self.step_size * g;
        }
        Ok(())
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            state_dim: self.state_dim,
            feature_dim: self.feature_dim,
            action_count: self.action_count,
            gamma: self.gamma,
            params: self.params.clone(),
        };
        std::fs::write(path, serde_json::to_string(&ck)?)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::config("version", format!("unsupported {}", ck.version)));
        }
        let mut sr = LinearSr::new(ck.state_dim, ck.feature_dim, ck.action_count, ck.gamma);
        sr.set_params(&ck.params)?;
        Ok(sr)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    state_dim: usize,
    feature_dim: usize,
    action_count: usize,
    gamma: f64,
    params: Vec<f64>,
}

/// Need estimate by vector projection: (m . phi) / ||phi||^2.
pub fn need_projection(m: &[f64], phi_target: &[f64]) -> Result<f64> {
    if m.len() != phi_target.len() {
        return Err(Error::ShapeMismatch {
            expected: m.len(),
            got: phi_target.len(),
        });
    }
    let norm_sq: f64 = phi_target.iter().map(|x| x * x).sum();
    if norm_sq == 0.0 {
        return Err(Error::DegenerateFeature);
    }
    let dot: f64 = m.iter().zip(phi_target).map(|(a, b)| a * b).sum();
    Ok(dot / norm_sq)
}

/// Shift a minibatch of needs so the smallest is zero when any are
/// negative: `needs - min(0, min_i needs_i)`. Nonnegative inputs pass
/// through unchanged, and the argmax is always preserved.
pub fn need_offset(needs: &[f64]) -> Vec<f64> {
    let min = needs.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = min.min(0.0);
    needs.iter().map(|n| n - shift).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_hot(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    fn random_sr(rng: &mut ChaCha8Rng, state_dim: usize, feature_dim: usize) -> LinearSr {
        let mut sr = LinearSr::new(state_dim, feature_dim, 2, 0.9);
        let params: Vec<f64> = (0..sr.params().len())
            .map(|_| rng.gen_range(-0.7..0.7))
            .collect();
        sr.set_params(&params).unwrap();
        sr
    }

    #[test]
    fn perfect_autoencoder_has_zero_reconstruction_loss() {
        let sr = LinearSr::tabular(4, 2, 0.9);
        let t = Transition::new(one_hot(4, 1), 0, 0.0, one_hot(4, 2), false);
        let report = sr.losses(&t, 0).unwrap();
        assert_eq!(report.loss_g, 0.0);
    }

    #[test]
    fn exact_bootstrap_head_has_zero_sr_loss() {
        // identity encoder over 3 one-hot states; heads realize the
        // closed-form SR of the chain 0 -> 1 -> 2(terminal)
        let mut sr = LinearSr::tabular(3, 1, 0.9);
        let m = Matrix::from_rows(&[
            vec![1.0, 0.9, 0.81],
            vec![0.0, 1.0, 0.9],
            vec![0.0, 0.0, 1.0],
        ]);
        sr.set_heads_from_matrix(&m);
        let t = Transition::new(one_hot(3, 0), 0, 0.0, one_hot(3, 1), false);
        let report = sr.losses(&t, 0).unwrap();
        assert!(report.loss_u < 1e-24, "loss_u = {}", report.loss_u);
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..50 {
            let state_dim = rng.gen_range(2..6);
            let feature_dim = rng.gen_range(2..6);
            let mut sr = random_sr(&mut rng, state_dim, feature_dim);
            sr.freeze_encoder = case % 5 == 0;
            let state: Vec<f64> = (0..state_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let next: Vec<f64> = (0..state_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let terminal = case % 7 == 0;
            let t = Transition::new(state, rng.gen_range(0..2), 0.0, next, terminal);
            let greedy = rng.gen_range(0..2);

            let target = sr.bootstrap_target(&t, greedy).unwrap();
            let report = sr.losses_against(&t, &target).unwrap();

            let h = 1e-5;
            let base = sr.params().to_vec();
            let encoder_len = feature_dim * state_dim;
            for pi in (0..base.len()).step_by(3) {
                if sr.freeze_encoder && pi < encoder_len {
                    // frozen encoder: analytic gradient is zero by design
                    assert_eq!(report.gradients[pi], 0.0);
                    continue;
                }
                let mut plus = base.clone();
                plus[pi] += h;
                let mut minus = base.clone();
                minus[pi] -= h;
                let mut sr_p = sr.clone();
                sr_p.set_params(&plus).unwrap();
                let mut sr_m = sr.clone();
                sr_m.set_params(&minus).unwrap();
                let lp = sr_p.losses_against(&t, &target).unwrap();
                let lm = sr_m.losses_against(&t, &target).unwrap();
                let fd = ((lp.loss_g + lp.loss_u) - (lm.loss_g + lm.loss_u)) / (2.0 * h);
                let an = report.gradients[pi];
                let denom = fd.abs().max(an.abs()).max(1e-6);
                assert!(
                    (fd - an).abs() / denom < 1e-4,
                    "case {case} param {pi}: fd={fd} analytic={an}"
                );
            }
        }
    }

    #[test]
    fn zero_gradient_and_zero_step_are_no_ops() {
        let mut sr = LinearSr::tabular(3, 2, 0.9);
        let before = sr.params().to_vec();
        sr.apply_step(&vec![0.0; before.len()]).unwrap();
        assert_eq!(sr.params(), &before[..]);

        sr.step_size = 0.0;
        sr.apply_step(&vec![1.0; before.len()]).unwrap();
        assert_eq!(sr.params(), &before[..]);
    }

    #[test]
    fn sgd_on_a_fixed_batch_decreases_sr_loss_monotonically() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sr = random_sr(&mut rng, 4, 4);
        sr.freeze_encoder = true;
        sr.step_size = 0.02;
        let batch: Vec<(Transition<Vec<f64>>, usize)> = (0..6)
            .map(|_| {
                let s = one_hot(4, rng.gen_range(0..4));
                let n = one_hot(4, rng.gen_range(0..4));
                (Transition::new(s, rng.gen_range(0..2), 0.0, n, false), rng.gen_range(0..2))
            })
            .collect();
        // targets frozen once, so this is a plain least-squares descent
        let targets: Vec<Vec<f64>> = batch
            .iter()
            .map(|(t, g)| sr.bootstrap_target(t, *g).unwrap())
            .collect();
        let batch_loss = |sr: &LinearSr| -> f64 {
            batch
                .iter()
                .zip(&targets)
                .map(|((t, _), tgt)| sr.losses_against(t, tgt).unwrap().loss_u)
                .sum()
        };
        let mut last = batch_loss(&sr);
        for _ in 0..40 {
            let mut grad = vec![0.0; sr.params().len()];
            for ((t, _), tgt) in batch.iter().zip(&targets) {
                let r = sr.losses_against(t, tgt).unwrap();
                for (acc, gi) in grad.iter_mut().zip(&r.gradients) {
                    *acc += gi;
                }
            }
            sr.apply_step(&grad).unwrap();
            let now = batch_loss(&sr);
            assert!(now <= last + 1e-9, "loss rose from {last} to {now}");
            last = now;
        }
    }

    #[test]
    fn non_finite_gradients_are_rejected() {
        let mut sr = LinearSr::tabular(2, 1, 0.9);
        let mut grad = vec![0.0; sr.params().len()];
        grad[0] = f64::NAN;
        assert!(matches!(
            sr.apply_step(&grad),
            Err(Error::NonFiniteGradient)
        ));
    }

    #[test]
    fn projection_recovers_matrix_entries_on_one_hot_basis() {
        let m_row = [0.3, 1.2, 0.0, 0.7];
        for j in 0..4 {
            let phi = one_hot(4, j);
            assert_eq!(need_projection(&m_row, &phi).unwrap(), m_row[j]);
        }
    }

    #[test]
    fn projection_collinear_orthogonal_and_degenerate() {
        let phi = [0.5, -1.0, 2.0];
        let m: Vec<f64> = phi.iter().map(|x| 2.0 * x).collect();
        assert!((need_projection(&m, &phi).unwrap() - 2.0).abs() < 1e-12);

        let orth = [2.0, 1.0, 0.0];
        let phi2 = [-0.5, 1.0, 3.0];
        assert!(need_projection(&orth, &phi2).unwrap().abs() < 1e-12);

        assert!(matches!(
            need_projection(&[1.0, 1.0], &[0.0, 0.0]),
            Err(Error::DegenerateFeature)
        ));
    }

    #[test]
    fn offset_examples() {
        assert_eq!(need_offset(&[-0.2, 0.5, 1.0]), vec![0.0, 0.7, 1.2]);
        assert_eq!(need_offset(&[0.1, 0.2]), vec![0.1, 0.2]);
        assert_eq!(need_offset(&[-1.0]), vec![0.0]);
    }

    #[test]
    fn offset_preserves_argmax_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..1000 {
            let k = rng.gen_range(1..12);
            let needs: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let shifted = need_offset(&needs);
            assert!(shifted.iter().cloned().fold(f64::INFINITY, f64::min) >= 0.0);
            let argmax = |v: &[f64]| {
                v.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0
            };
            assert_eq!(argmax(&needs), argmax(&shifted));
        }
    }

    proptest::proptest! {
        // the offset is a single translation: min(out) >= 0, ordering
        // preserved, and out - in is constant across the batch
        #[test]
        fn offset_is_an_order_preserving_translation(
            needs in proptest::collection::vec(-5.0f64..5.0, 1..24),
        ) {
            let out = need_offset(&needs);
            let shift = out[0] - needs[0];
            proptest::prop_assert!(out.iter().cloned().fold(f64::INFINITY, f64::min) >= 0.0);
            proptest::prop_assert!(shift >= 0.0);
            for (o, n) in out.iter().zip(&needs) {
                proptest::prop_assert!((o - n - shift).abs() < 1e-12);
            }
            if needs.iter().all(|&n| n >= 0.0) {
                proptest::prop_assert_eq!(&out, &needs);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let sr = random_sr(&mut rng, 3, 5);
        let dir = std::env::temp_dir().join("need_replay_ck_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sr.json");
        sr.save_checkpoint(&path).unwrap();
        let loaded = LinearSr::load_checkpoint(&path).unwrap();
        assert_eq!(loaded.params(), sr.params());
        assert_eq!(loaded.feature_dim(), 5);
        assert_eq!(loaded.gamma, 0.9);
    }

    #[test]
    fn dimension_mismatches_are_shape_errors() {
        let sr = LinearSr::tabular(3, 1, 0.9);
        assert!(matches!(
            sr.encode(&[1.0, 0.0]),
            Err(Error::ShapeMismatch { .. })
        ));
        let t = Transition::new(vec![1.0, 0.0], 0, 0.0, vec![0.0, 1.0], false);
        assert!(sr.losses(&t, 0).is_err());
    }
}
