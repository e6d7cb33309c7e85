//! Gated recurrent trunk with four heads (skill policy, skill Q, move policy, move Q),
//! forward pass and truncated backpropagation through time.

use serde::{Deserialize, Serialize};

use super::params::{Block, NetworkParams, Real};
use crate::arena::SkillMask;
use crate::error::NetError;

/// Stand-in for negative infinity on masked logits.
pub const MASKED_LOGIT: f64 = -1e9;

/// Default truncation window for backpropagation through time.
pub const BPTT_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Skill,
    Move,
}

impl Head {
    pub fn other(self) -> Head {
        match self {
            Head::Skill => Head::Move,
            Head::Move => Head::Skill,
        }
    }
}

/// Hidden activation carried across ticks of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState<F> {
    pub hidden: Vec<F>,
}

impl<F: Real> RecurrentState<F> {
    pub fn zeros(hidden: usize) -> Self {
        RecurrentState { hidden: vec![F::zero(); hidden] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutputs<F> {
    pub skill_logits: Vec<F>,
    pub skill_probs: Vec<F>,
    pub skill_q: Vec<F>,
    pub move_logits: Vec<F>,
    pub move_probs: Vec<F>,
    pub move_q: Vec<F>,
}

impl<F: Real> HeadOutputs<F> {
    pub fn probs(&self, head: Head) -> &[F] {
        match head {
            Head::Skill => &self.skill_probs,
            Head::Move => &self.move_probs,
        }
    }

    pub fn q(&self, head: Head) -> &[F] {
        match head {
            Head::Skill => &self.skill_q,
            Head::Move => &self.move_q,
        }
    }

    /// State value of a head as the policy-weighted mean of its Q values.
    pub fn value(&self, head: Head) -> F {
        self.probs(head)
            .iter()
            .zip(self.q(head))
            .map(|(&p, &q)| p * q)
            .fold(F::zero(), |a, b| a + b)
    }
}

/// Gradient of a scalar loss with respect to the raw head outputs of one tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeadGrad<F> {
    pub skill_logits: Option<Vec<F>>,
    pub skill_q: Option<Vec<F>>,
    pub move_logits: Option<Vec<F>>,
    pub move_q: Option<Vec<F>>,
}

impl<F: Real> HeadGrad<F> {
    pub fn logits_mut(&mut self, head: Head, len: usize) -> &mut Vec<F> {
        let slot = match head {
            Head::Skill => &mut self.skill_logits,
            Head::Move => &mut self.move_logits,
        };
        slot.get_or_insert_with(|| vec![F::zero(); len])
    }

    pub fn q_mut(&mut self, head: Head, len: usize) -> &mut Vec<F> {
        let slot = match head {
            Head::Skill => &mut self.skill_q,
            Head::Move => &mut self.move_q,
        };
        slot.get_or_insert_with(|| vec![F::zero(); len])
    }

    pub fn scaled(&self, k: F) -> Self {
        let s = |v: &Option<Vec<F>>| v.as_ref().map(|v| v.iter().map(|&x| x * k).collect());
        HeadGrad {
            skill_logits: s(&self.skill_logits),
            skill_q: s(&self.skill_q),
            move_logits: s(&self.move_logits),
            move_q: s(&self.move_q),
        }
    }
}

/// Activations of one tick kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache<F> {
    input: Vec<F>,
    h_prev: Vec<F>,
    reset: Vec<F>,
    update: Vec<F>,
    candidate: Vec<F>,
    /// Recurrent pre-activation of the candidate gate (before the reset gate multiplies it).
    rec_candidate: Vec<F>,
    h_new: Vec<F>,
    mask: SkillMask,
    pub outputs: HeadOutputs<F>,
}

/// Forward pass over a sequence of ticks.
#[derive(Debug, Clone)]
pub struct Trace<F> {
    pub steps: Vec<StepCache<F>>,
}

impl<F: Real> Trace<F> {
    pub fn outputs(&self, t: usize) -> &HeadOutputs<F> {
        &self.steps[t].outputs
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// `out[r] = b[r] + sum_c w[r, c] * x[c]`
fn affine<F: Real>(w: &[F], b: &[F], x: &[F], out: &mut [F]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = b[r];
        for (wv, xv) in row.iter().zip(x) {
            acc += *wv * *xv;
        }
        *o = acc;
    }
}

/// `dx[c] += sum_r w[r, c] * dy[r]` and `dw[r, c] += dy[r] * x[c]`, `db[r] += dy[r]`.
fn affine_backward<F: Real>(
    w: &[F],
    x: &[F],
    dy: &[F],
    dw: &mut [F],
    db: Option<&mut [F]>,
    dx: &mut [F],
) {
    let cols = x.len();
    for (r, &g) in dy.iter().enumerate() {
        if g == F::zero() {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        let drow = &mut dw[r * cols..(r + 1) * cols];
        for c in 0..cols {
            drow[c] += g * x[c];
            dx[c] += g * row[c];
        }
    }
    if let Some(db) = db {
        for (d, &g) in db.iter_mut().zip(dy) {
            *d += g;
        }
    }
}

/// Softmax restricted to `available` entries; the rest get exactly zero.
pub fn masked_softmax<F: Real>(logits: &[F], available: impl Fn(usize) -> bool) -> Vec<F> {
    let masked = F::of(MASKED_LOGIT);
    let shifted: Vec<F> = logits
        .iter()
        .enumerate()
        .map(|(i, &l)| if available(i) { l } else { masked })
        .collect();
    let max = shifted.iter().copied().fold(F::neg_infinity(), F::max);
    let mut probs: Vec<F> = shifted.iter().map(|&l| (l - max).exp()).collect();
    for (i, p) in probs.iter_mut().enumerate() {
        if !available(i) {
            *p = F::zero();
        }
    }
    let total: F = probs.iter().copied().sum();
    for p in &mut probs {
        *p = *p / total;
    }
    probs
}

impl<F: Real> NetworkParams<F> {
    /// One tick: advance the hidden state and evaluate the four heads.
    pub fn forward(
        &self,
        obs: &[f32],
        h: &RecurrentState<F>,
        mask: SkillMask,
    ) -> Result<(HeadOutputs<F>, RecurrentState<F>), NetError> {
        let cache = self.step_cache(obs, &h.hidden, mask, 0)?;
        let hidden = cache.h_new.clone();
        Ok((cache.outputs, RecurrentState { hidden }))
    }

    /// Forward over a whole sequence starting from a zero hidden state.
    pub fn forward_sequence<'a, I>(&self, inputs: I) -> Result<Trace<F>, NetError>
    where
        I: IntoIterator<Item = (&'a [f32], SkillMask)>,
    {
        let mut h = vec![F::zero(); self.shape().hidden];
        let mut steps = Vec::new();
        for (t, (obs, mask)) in inputs.into_iter().enumerate() {
            let cache = self.step_cache(obs, &h, mask, t)?;
            h.clone_from(&cache.h_new);
            steps.push(cache);
        }
        Ok(Trace { steps })
    }

    fn step_cache(&self, obs: &[f32], h_prev: &[F], mask: SkillMask, tick: usize) -> Result<StepCache<F>, NetError> {
        let s = *self.shape();
        if obs.len() != s.obs_len {
            return Err(NetError::Shape(format!("observation length {} != {}", obs.len(), s.obs_len)));
        }
        if mask.len() != s.skills {
            return Err(NetError::Shape(format!("mask length {} != {}", mask.len(), s.skills)));
        }
        if !mask.get(0) || mask.is_empty() {
            return Err(NetError::EmptyMask);
        }
        let hsz = s.hidden;
        let input: Vec<F> = obs.iter().map(|&v| F::of(f64::from(v))).collect();

        let mut ax = vec![F::zero(); 3 * hsz];
        let mut ah = vec![F::zero(); 3 * hsz];
        affine(self.block(Block::InputWeights), self.block(Block::InputBias), &input, &mut ax);
        affine(self.block(Block::RecurrentWeights), self.block(Block::RecurrentBias), h_prev, &mut ah);

        let mut update = vec![F::zero(); hsz];
        let mut reset = vec![F::zero(); hsz];
        let mut candidate = vec![F::zero(); hsz];
        let mut h_new = vec![F::zero(); hsz];
        for j in 0..hsz {
            update[j] = sigmoid(ax[j] + ah[j]);
            reset[j] = sigmoid(ax[hsz + j] + ah[hsz + j]);
            candidate[j] = (ax[2 * hsz + j] + reset[j] * ah[2 * hsz + j]).tanh();
            h_new[j] = (F::one() - update[j]) * candidate[j] + update[j] * h_prev[j];
        }
        if h_new.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFinite { tick });
        }

        let head = |wb: Block, bb: Block, n: usize| {
            let mut out = vec![F::zero(); n];
            affine(self.block(wb), self.block(bb), &h_new, &mut out);
            out
        };
        let skill_logits = head(Block::SkillPolicyWeights, Block::SkillPolicyBias, s.skills);
        let skill_q = head(Block::SkillQWeights, Block::SkillQBias, s.skills);
        let move_logits = head(Block::MovePolicyWeights, Block::MovePolicyBias, s.moves);
        let move_q = head(Block::MoveQWeights, Block::MoveQBias, s.moves);
        let skill_probs = masked_softmax(&skill_logits, |i| mask.get(i));
        let move_probs = masked_softmax(&move_logits, |_| true);
        let outputs = HeadOutputs { skill_logits, skill_probs, skill_q, move_logits, move_probs, move_q };
        let finite = |v: &[F]| v.iter().all(|x| x.is_finite());
        if !(finite(&outputs.skill_probs) && finite(&outputs.move_probs) && finite(&outputs.skill_q) && finite(&outputs.move_q)) {
            return Err(NetError::NonFinite { tick });
        }

        Ok(StepCache {
            input,
            h_prev: h_prev.to_vec(),
            update,
            reset,
            candidate,
            rec_candidate: ah[2 * hsz..].to_vec(),
            h_new,
            mask,
            outputs,
        })
    }

    /// Gradient of a loss whose per-tick derivatives w.r.t. the raw head outputs are `signals`.
    ///
    /// The hidden-state gradient is cut at every multiple of `window` ticks, so each window
    /// is differentiated on its own with its incoming hidden state held fixed.
    pub fn backward(&self, trace: &Trace<F>, signals: &[HeadGrad<F>], window: usize) -> Result<NetworkParams<F>, NetError> {
        if signals.len() != trace.len() {
            return Err(NetError::Shape(format!(
                "{} gradient signals for {} ticks",
                signals.len(),
                trace.len()
            )));
        }
        let s = *self.shape();
        let hsz = s.hidden;
        let window = window.max(1);
        let mut grad = self.zeros_like();
        let mut dh_carry = vec![F::zero(); hsz];

        for t in (0..trace.len()).rev() {
            let c = &trace.steps[t];
            let sig = &signals[t];
            if (t + 1) % window == 0 {
                dh_carry.iter_mut().for_each(|v| *v = F::zero());
            }
            let mut dh = dh_carry.clone();

            let heads = [
                (Block::SkillPolicyWeights, Block::SkillPolicyBias, &sig.skill_logits, true),
                (Block::SkillQWeights, Block::SkillQBias, &sig.skill_q, false),
                (Block::MovePolicyWeights, Block::MovePolicyBias, &sig.move_logits, false),
                (Block::MoveQWeights, Block::MoveQBias, &sig.move_q, false),
            ];
            for (wb, bb, dy, masked) in heads {
                let Some(dy) = dy else { continue };
                let dy: Vec<F> = if masked {
                    dy.iter()
                        .enumerate()
                        .map(|(i, &g)| if c.mask.get(i) { g } else { F::zero() })
                        .collect()
                } else {
                    dy.clone()
                };
                let wr = grad.block_range(wb);
                let br = grad.block_range(bb);
                let (lo, hi) = grad.as_mut_slice().split_at_mut(br.start);
                affine_backward(
                    self.block(wb),
                    &c.h_new,
                    &dy,
                    &mut lo[wr],
                    Some(&mut hi[..br.len()]),
                    &mut dh,
                );
            }

            // Gated recurrent cell.
            let mut dax = vec![F::zero(); 3 * hsz];
            let mut dah = vec![F::zero(); 3 * hsz];
            let mut dh_prev = vec![F::zero(); hsz];
            for j in 0..hsz {
                let (z, r, n) = (c.update[j], c.reset[j], c.candidate[j]);
                let dn = dh[j] * (F::one() - z);
                let dz = dh[j] * (c.h_prev[j] - n);
                dh_prev[j] = dh[j] * z;
                let dn_pre = dn * (F::one() - n * n);
                let dr = dn_pre * c.rec_candidate[j];
                let dz_pre = dz * z * (F::one() - z);
                let dr_pre = dr * r * (F::one() - r);
                dax[j] = dz_pre;
                dah[j] = dz_pre;
                dax[hsz + j] = dr_pre;
                dah[hsz + j] = dr_pre;
                dax[2 * hsz + j] = dn_pre;
                dah[2 * hsz + j] = dn_pre * r;
            }
            let mut dx_unused = vec![F::zero(); s.obs_len];
            {
                let wr = grad.block_range(Block::InputWeights);
                let br = grad.block_range(Block::InputBias);
                let (lo, hi) = grad.as_mut_slice().split_at_mut(br.start);
                affine_backward(
                    self.block(Block::InputWeights),
                    &c.input,
                    &dax,
                    &mut lo[wr],
                    Some(&mut hi[..br.len()]),
                    &mut dx_unused,
                );
            }
            {
                let wr = grad.block_range(Block::RecurrentWeights);
                let br = grad.block_range(Block::RecurrentBias);
                let (lo, hi) = grad.as_mut_slice().split_at_mut(br.start);
                affine_backward(
                    self.block(Block::RecurrentWeights),
                    &c.h_prev,
                    &dah,
                    &mut lo[wr],
                    Some(&mut hi[..br.len()]),
                    &mut dh_prev,
                );
            }
            if dh_prev.iter().any(|v| !v.is_finite()) {
                return Err(NetError::NonFinite { tick: t });
            }
            dh_carry = dh_prev;
        }
        if !grad.is_finite() {
            return Err(NetError::NonFinite { tick: 0 });
        }
        Ok(grad)
    }
}

/// Gradient of `sum_i w_i log p_i` with respect to the logits of a masked softmax.
///
/// `d/dlogit_j = w_j - p_j * sum_i w_i` on available entries and zero elsewhere.
pub fn log_prob_weighted_grad<F: Real>(probs: &[F], weights: &[F], available: impl Fn(usize) -> bool) -> Vec<F> {
    let total: F = weights
        .iter()
        .enumerate()
        .filter(|(i, _)| available(*i))
        .map(|(_, &w)| w)
        .sum();
    probs
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(i, (&p, &w))| if available(i) { w - p * total } else { F::zero() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::MOVE_ACTIONS;
    use crate::policy::NetShape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_shape() -> NetShape {
        NetShape { obs_len: 4, hidden: 8, skills: 5, moves: MOVE_ACTIONS }
    }

    #[test]
    fn masked_softmax_matches_hand_values() {
        let p = masked_softmax(&[1.0f64, 2.0, 3.0], |i| i != 1);
        assert!((p[0] - 0.119_202_922).abs() < 1e-6);
        assert_eq!(p[1], 0.0);
        assert!((p[2] - 0.880_797_078).abs() < 1e-6);
    }

    #[test]
    fn noop_only_mask_gives_one_hot() {
        let params = NetworkParams::<f64>::init(tiny_shape(), 3);
        let h = RecurrentState::zeros(8);
        let (out, _) = params.forward(&[0.1, 0.2, 0.3, 0.4], &h, SkillMask::only_noop(5)).unwrap();
        assert_eq!(out.skill_probs, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_weights_give_uniform() {
        let params = NetworkParams::<f64>::zeros(tiny_shape());
        let (out, h) = params
            .forward(&[0.5, -0.5, 1.0, 0.0], &RecurrentState::zeros(8), SkillMask::all(5))
            .unwrap();
        for p in &out.skill_probs {
            assert!((p - 0.2).abs() < 1e-12);
        }
        for p in &out.move_probs {
            assert!((p - 1.0 / 18.0).abs() < 1e-12);
        }
        assert!(h.hidden.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_mask_is_rejected() {
        let params = NetworkParams::<f64>::zeros(tiny_shape());
        let err = params
            .forward(&[0.0; 4], &RecurrentState::zeros(8), SkillMask::none(5))
            .unwrap_err();
        assert_eq!(err, NetError::EmptyMask);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let params = NetworkParams::<f64>::init(tiny_shape(), 1);
        let obs = [[0.1f32, 0.2, 0.3, 0.4], [0.0, -0.1, 0.5, 0.9]];
        let trace = params.forward_sequence(obs.iter().map(|o| (&o[..], SkillMask::all(5)))).unwrap();
        let g = params.backward(&trace, &[HeadGrad::default(), HeadGrad::default()], 20).unwrap();
        assert!(g.as_slice().iter().all(|v| *v == 0.0));
    }

    /// Loss = sum_t <a_t, skill_logits_t> + <b_t, move_q_t> + sum_t c_t * log pi_skill(k_t).
    fn probe_loss(params: &NetworkParams<f64>, obs: &[[f32; 4]], masks: &[SkillMask], coeffs: &[(Vec<f64>, Vec<f64>, f64, usize)]) -> f64 {
        let trace = params
            .forward_sequence(obs.iter().zip(masks).map(|(o, m)| (&o[..], *m)))
            .unwrap();
        let mut loss = 0.0;
        for (t, (a, b, c, k)) in coeffs.iter().enumerate() {
            let out = trace.outputs(t);
            loss += out.skill_q.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
            loss += out.move_q.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            loss += c * out.skill_probs[*k].ln();
        }
        loss
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let shape = tiny_shape();
        let params = NetworkParams::<f64>::init(shape, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let obs: Vec<[f32; 4]> = (0..3).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let masks = vec![
            SkillMask::all(5),
            SkillMask::from_bools(&[true, false, true, true, false]),
            SkillMask::from_bools(&[true, true, false, false, true]),
        ];
        let coeffs: Vec<(Vec<f64>, Vec<f64>, f64, usize)> = (0..3)
            .map(|t| {
                let a = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
                (a, b, rng.random_range(-2.0..2.0), [2, 3, 4][t])
            })
            .collect();

        let trace = params.forward_sequence(obs.iter().zip(&masks).map(|(o, m)| (&o[..], *m))).unwrap();
        let signals: Vec<HeadGrad<f64>> = coeffs
            .iter()
            .enumerate()
            .map(|(t, (a, b, c, k))| {
                let out = trace.outputs(t);
                let mut w = vec![0.0; 5];
                w[*k] = *c;
                HeadGrad {
                    skill_logits: Some(log_prob_weighted_grad(&out.skill_probs, &w, |i| masks[t].get(i))),
                    skill_q: Some(a.clone()),
                    move_logits: None,
                    move_q: Some(b.clone()),
                }
            })
            .collect();
        let grad = params.backward(&trace, &signals, 20).unwrap();

        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus.as_mut_slice()[i] += eps;
            let mut minus = params.clone();
            minus.as_mut_slice()[i] -= eps;
            let fd = (probe_loss(&plus, &obs, &masks, &coeffs) - probe_loss(&minus, &obs, &masks, &coeffs)) / (2.0 * eps);
            let an = grad.as_slice()[i];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn doubling_the_loss_doubles_the_gradient() {
        let params = NetworkParams::<f64>::init(tiny_shape(), 2);
        let obs = [[0.3f32, 0.1, -0.2, 0.7]; 3];
        let trace = params.forward_sequence(obs.iter().map(|o| (&o[..], SkillMask::all(5)))).unwrap();
        let sig: Vec<HeadGrad<f64>> = (0..3)
            .map(|t| HeadGrad { skill_q: Some(vec![t as f64 + 0.5; 5]), ..Default::default() })
            .collect();
        let g1 = params.backward(&trace, &sig, 20).unwrap();
        let sig2: Vec<_> = sig.iter().map(|s| s.scaled(2.0)).collect();
        let g2 = params.backward(&trace, &sig2, 20).unwrap();
        for (a, b) in g1.as_slice().iter().zip(g2.as_slice()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn truncation_stops_gradient_at_window_edge() {
        let params = NetworkParams::<f64>::init(tiny_shape(), 5);
        let obs = [[0.3f32, 0.1, -0.2, 0.7], [0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0]];
        let trace = params.forward_sequence(obs.iter().map(|o| (&o[..], SkillMask::all(5)))).unwrap();
        // Only the last tick carries loss; with window 2 it sits alone in its window, so the
        // input weight gradient only sees the last tick's input.
        let mut sig = vec![HeadGrad::default(); 3];
        sig[2].skill_q = Some(vec![1.0; 5]);
        let full = params.backward(&trace, &sig, 20).unwrap();
        let cut = params.backward(&trace, &sig, 2).unwrap();
        assert_ne!(full, cut);
        // With a one-tick window the recurrent weights see only the last tick's previous hidden
        // state, so the gradient matches a hand-built single-tick trace from that state.
        let one = params.backward(&trace, &sig, 1).unwrap();
        let h1 = RecurrentState { hidden: trace.steps[1].h_new.clone() };
        let mut single = trace.clone();
        single.steps = vec![trace.steps[2].clone()];
        assert_eq!(single.steps[0].h_prev, h1.hidden);
        let g_single = params.backward(&single, &sig[2..], 1).unwrap();
        assert_eq!(one, g_single);
    }
}
