use serde::{Deserialize, Serialize};

use super::retrace::{action_index, importance_ratio, retrace_from_outputs, DEFAULT_TRUNCATION};
use crate::error::AcerError;
use crate::pipeline::{EpisodeLog, Transition};
use crate::policy::{log_prob_weighted_grad, Head, HeadGrad, HeadOutputs, NetworkParams, Real, BPTT_WINDOW};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcerConfig {
    /// Truncation `c` of the policy-gradient importance weight.
    pub truncation: f64,
    /// Truncation of the Retrace trace coefficient.
    pub trace_truncation: f64,
    pub policy_weight: f64,
    pub critic_weight: f64,
    pub entropy_weight: f64,
    pub bptt_window: usize,
}

impl Default for AcerConfig {
    fn default() -> Self {
        AcerConfig {
            truncation: DEFAULT_TRUNCATION,
            trace_truncation: 1.0,
            policy_weight: 1.0,
            critic_weight: 1.0,
            entropy_weight: 0.0,
            bptt_window: BPTT_WINDOW,
        }
    }
}

/// Diagnostics accumulated over the transitions of a gradient computation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GradStats {
    pub samples: usize,
    pub policy_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub ratio_sum: f64,
    pub ratio_max: f64,
    pub truncated: usize,
}

impl GradStats {
    pub fn merge(&mut self, o: &GradStats) {
        self.samples += o.samples;
        self.policy_loss += o.policy_loss;
        self.critic_loss += o.critic_loss;
        self.entropy += o.entropy;
        self.ratio_sum += o.ratio_sum;
        self.ratio_max = self.ratio_max.max(o.ratio_max);
        self.truncated += o.truncated;
    }

    pub fn mean(&self, total: f64) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            total / self.samples as f64
        }
    }
}

/// Per-action weights `w` such that the policy part of the update ascends `sum_b w_b log pi(b)`:
///
/// * `min(c, rho(a)) * (q_ret - V)` on the taken action `a`,
/// * `pi(b) * [1 - c / rho(b)]_+ * (Q(b) - V)` on every action `b` (bias correction).
///
/// `rho(b) = pi(b) / mu(b)`; an action the behavior policy never picks has an unbounded ratio
/// and a correction coefficient of one.
pub fn policy_weights(pi: &[f64], mu: &[f64], q: &[f64], action: usize, q_ret: f64, c: f64) -> Result<(Vec<f64>, f64), AcerError> {
    let v: f64 = pi.iter().zip(q).map(|(p, q)| p * q).sum();
    let (rho, rho_bar) = importance_ratio(pi[action], mu[action], c)?;
    let mut w: Vec<f64> = pi
        .iter()
        .zip(mu)
        .zip(q)
        .map(|((&p, &m), &qb)| {
            if p <= 0.0 {
                return 0.0;
            }
            let coeff = if m <= 0.0 { 1.0 } else { (1.0 - c * m / p).max(0.0) };
            p * coeff * (qb - v)
        })
        .collect();
    w[action] += rho_bar * (q_ret - v);
    Ok((w, rho))
}

fn to_f64<F: Real>(v: &[F]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

fn behavior_dist(t: &Transition, head: Head) -> Option<&[f64]> {
    match head {
        Head::Skill => Some(&t.behavior_skill),
        Head::Move => t.behavior_move.as_deref(),
    }
}

/// Loss derivatives w.r.t. the raw head outputs for one episode and one head.
///
/// The losses are `-policy_weight * sum_b w_b log pi(b)` with `w` held constant,
/// `critic_weight * 0.5 * (Q(a) - Q_ret)^2` and `-entropy_weight * H(pi)`, summed over the
/// transitions where `head` made a decision.
pub fn head_signals<F: Real>(
    transitions: &[Transition],
    outputs: &[&HeadOutputs<F>],
    head: Head,
    cfg: &AcerConfig,
) -> Result<(Vec<HeadGrad<F>>, GradStats), AcerError> {
    let targets = retrace_from_outputs(transitions, outputs, head, cfg.trace_truncation)?;
    let mut stats = GradStats::default();
    let mut signals = Vec::with_capacity(transitions.len());
    for (t, tr) in transitions.iter().enumerate() {
        let mut g = HeadGrad::default();
        let Some(mu) = behavior_dist(tr, head) else {
            signals.push(g);
            continue;
        };
        let out = outputs[t];
        let pi = to_f64(out.probs(head));
        let q = to_f64(out.q(head));
        let a = action_index(tr, head);
        let avail = |i: usize| head == Head::Move || tr.mask.get(i);
        let (w, rho) = policy_weights(&pi, mu, &q, a, targets[t], cfg.truncation)?;

        let mut dlogit = log_prob_weighted_grad(&pi, &w, avail);
        for d in &mut dlogit {
            *d *= -cfg.policy_weight;
        }
        let entropy: f64 = pi.iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum();
        if cfg.entropy_weight != 0.0 {
            // dH/dz_j = -p_j (ln p_j + H)
            for (j, d) in dlogit.iter_mut().enumerate() {
                if avail(j) && pi[j] > 0.0 {
                    *d += cfg.entropy_weight * pi[j] * (pi[j].ln() + entropy);
                }
            }
        }
        let err = q[a] - targets[t];
        let dq = g.q_mut(head, q.len());
        dq[a] = F::of(cfg.critic_weight * err);
        *g.logits_mut(head, pi.len()) = dlogit.into_iter().map(F::of).collect();

        let surrogate: f64 = w.iter().zip(&pi).filter(|(_, &p)| p > 0.0).map(|(w, p)| w * p.ln()).sum();
        stats.samples += 1;
        stats.policy_loss -= surrogate;
        stats.critic_loss += 0.5 * err * err;
        stats.entropy += entropy;
        stats.ratio_sum += rho;
        stats.ratio_max = stats.ratio_max.max(rho);
        stats.truncated += usize::from(rho > cfg.truncation);
        signals.push(g);
    }
    Ok((signals, stats))
}

/// Unnormalized gradient of the ACER loss of one episode w.r.t. the network parameters.
pub fn episode_gradient<F: Real>(
    params: &NetworkParams<F>,
    episode: &EpisodeLog,
    head: Head,
    cfg: &AcerConfig,
) -> Result<(NetworkParams<F>, GradStats), AcerError> {
    let trace = params.forward_sequence(episode.transitions.iter().map(|t| (t.obs.as_slice(), t.mask)))?;
    let outputs: Vec<_> = trace.steps.iter().map(|s| &s.outputs).collect();
    let (signals, stats) = head_signals(&episode.transitions, &outputs, head, cfg)?;
    let grad = params.backward(&trace, &signals, cfg.bptt_window)?;
    Ok((grad, stats))
}

/// Frozen-coefficient surrogate whose gradient equals [`episode_gradient`] at the point where
/// the coefficients were taken. Used to check the analytic gradient numerically.
#[derive(Debug, Clone)]
pub struct FrozenSurrogate {
    head: Head,
    cfg: AcerConfig,
    /// Per transition: `(policy weights, Q_ret)`; `None` where the head made no decision.
    coeffs: Vec<Option<(Vec<f64>, f64)>>,
}

impl FrozenSurrogate {
    pub fn capture<F: Real>(params: &NetworkParams<F>, episode: &EpisodeLog, head: Head, cfg: &AcerConfig) -> Result<Self, AcerError> {
        let trace = params.forward_sequence(episode.transitions.iter().map(|t| (t.obs.as_slice(), t.mask)))?;
        let outputs: Vec<_> = trace.steps.iter().map(|s| &s.outputs).collect();
        let targets = retrace_from_outputs(&episode.transitions, &outputs, head, cfg.trace_truncation)?;
        let mut coeffs = Vec::with_capacity(targets.len());
        for (t, tr) in episode.transitions.iter().enumerate() {
            coeffs.push(match behavior_dist(tr, head) {
                Some(mu) => {
                    let pi = to_f64(outputs[t].probs(head));
                    let q = to_f64(outputs[t].q(head));
                    let (w, _) = policy_weights(&pi, mu, &q, action_index(tr, head), targets[t], cfg.truncation)?;
                    Some((w, targets[t]))
                }
                None => None,
            });
        }
        Ok(FrozenSurrogate { head, cfg: *cfg, coeffs })
    }

    pub fn loss<F: Real>(&self, params: &NetworkParams<F>, episode: &EpisodeLog) -> Result<f64, AcerError> {
        let trace = params.forward_sequence(episode.transitions.iter().map(|t| (t.obs.as_slice(), t.mask)))?;
        let mut total = 0.0;
        for (t, tr) in episode.transitions.iter().enumerate() {
            let Some((w, q_ret)) = &self.coeffs[t] else { continue };
            let out = trace.outputs(t);
            let pi = to_f64(out.probs(self.head));
            let q = to_f64(out.q(self.head));
            let surrogate: f64 = w.iter().zip(&pi).filter(|(_, &p)| p > 0.0).map(|(w, p)| w * p.ln()).sum();
            let entropy: f64 = pi.iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum();
            let err = q[action_index(tr, self.head)] - q_ret;
            total += -self.cfg.policy_weight * surrogate + self.cfg.critic_weight * 0.5 * err * err
                - self.cfg.entropy_weight * entropy;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn softmax(z: &[f64]) -> Vec<f64> {
        let m = z.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|v| v / s).collect()
    }

    #[test]
    fn bias_correction_vanishes_on_policy() {
        let pi = [0.2, 0.5, 0.3];
        let q = [1.0, -2.0, 0.5];
        for a in 0..3 {
            let (w, rho) = policy_weights(&pi, &pi, &q, a, 0.7, 10.0).unwrap();
            assert_eq!(rho, 1.0);
            let v: f64 = pi.iter().zip(&q).map(|(p, q)| p * q).sum();
            for (b, wb) in w.iter().enumerate() {
                let expected = if b == a { 0.7 - v } else { 0.0 };
                assert_eq!(*wb, expected);
            }
        }
    }

    /// Expected ACER logit gradient over `a ~ mu` on a single-step problem matches the exact
    /// policy gradient of `sum_a pi(a) r(a)` whenever `Q` equals the true action values.
    #[test]
    fn expected_gradient_is_unbiased() {
        let states = [
            (vec![0.3, -0.2, 1.1], vec![0.6, 0.3, 0.1], vec![1.0, -0.5, 2.0]),
            (vec![-1.0, 0.4, 0.0], vec![0.05, 0.05, 0.9], vec![-1.0, 3.0, 0.25]),
        ];
        for c in [0.5, 1.0, 10.0] {
            for (z, mu, r) in &states {
                let pi = softmax(z);
                let exact: Vec<f64> = (0..3)
                    .map(|j| {
                        let j_term: f64 = (0..3).map(|a| pi[a] * r[a] * (f64::from(u8::from(a == j)) - pi[j])).sum();
                        j_term
                    })
                    .collect();
                let mut expected = [0.0; 3];
                for a in 0..3 {
                    let (w, _) = policy_weights(&pi, mu, r, a, r[a], c).unwrap();
                    let g = log_prob_weighted_grad(&pi, &w, |_| true);
                    for j in 0..3 {
                        expected[j] += mu[a] * g[j];
                    }
                }
                for j in 0..3 {
                    assert!((expected[j] - exact[j]).abs() < 1e-12, "c={c} j={j}: {} vs {}", expected[j], exact[j]);
                }
            }
        }
    }

    #[test]
    fn unreachable_action_gets_full_correction() {
        let pi = [0.5, 0.5];
        let mu = [1.0, 0.0];
        let q = [0.0, 2.0];
        let (w, _) = policy_weights(&pi, &mu, &q, 0, 0.0, 10.0).unwrap();
        assert!((w[1] - 0.5 * (2.0 - 1.0)).abs() < 1e-12);
    }
}
