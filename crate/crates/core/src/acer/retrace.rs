use crate::error::AcerError;
use crate::pipeline::{EpisodeLog, Transition};
use crate::policy::{Head, HeadOutputs, NetworkParams, Real};

/// Truncation of the importance ratio in the policy-gradient term.
pub const DEFAULT_TRUNCATION: f64 = 10.0;

/// Returns `(rho, min(c, rho))` for `rho = target / behavior`.
pub fn importance_ratio(target_prob: f64, behavior_prob: f64, c: f64) -> Result<(f64, f64), AcerError> {
    if behavior_prob <= 0.0 || !behavior_prob.is_finite() {
        return Err(AcerError::ZeroBehaviorProb);
    }
    let rho = target_prob / behavior_prob;
    Ok((rho, rho.min(c)))
}

/// Behavior probability of the taken action for `head`, `None` where that head made no decision.
pub(crate) fn behavior_prob(t: &Transition, head: Head) -> Option<f64> {
    match head {
        Head::Skill => Some(t.behavior_skill[t.action.skill]),
        Head::Move => t.behavior_move.as_ref().map(|m| m[t.action.mv]),
    }
}

pub(crate) fn action_index(t: &Transition, head: Head) -> usize {
    match head {
        Head::Skill => t.action.skill,
        Head::Move => t.action.mv,
    }
}

/// Retrace targets for one head, computed backwards from the terminal transition:
///
/// `Q_ret[t] = r[t] + g[t] * (cbar[t+1] * (Q_ret[t+1] - Q(x[t+1], a[t+1])) + V(x[t+1]))`
///
/// with `g[t]` the transition's gap discount and `cbar = min(trace_c, rho)`. Where the
/// head made no decision at `t+1` the action was fixed, so the bracket reduces to `Q_ret[t+1]`.
pub fn retrace_from_outputs<F: Real>(
    transitions: &[Transition],
    outputs: &[&HeadOutputs<F>],
    head: Head,
    trace_c: f64,
) -> Result<Vec<f64>, AcerError> {
    let n = transitions.len();
    let mut targets = vec![0.0; n];
    let Some(last) = n.checked_sub(1) else {
        return Ok(targets);
    };
    targets[last] = transitions[last].reward;
    for t in (0..last).rev() {
        let next = &transitions[t + 1];
        let out = outputs[t + 1];
        let bootstrap = match behavior_prob(next, head) {
            Some(mu) => {
                let a = action_index(next, head);
                let pi = out.probs(head)[a].to_f64().unwrap_or(f64::NAN);
                let (_, cbar) = importance_ratio(pi, mu, trace_c)?;
                let q = out.q(head)[a].to_f64().unwrap_or(f64::NAN);
                let v = out.value(head).to_f64().unwrap_or(f64::NAN);
                cbar * (targets[t + 1] - q) + v
            }
            None => targets[t + 1],
        };
        targets[t] = transitions[t].reward + transitions[t].gap_discount * bootstrap;
    }
    Ok(targets)
}

/// Retrace targets of an episode under `params`.
pub fn retrace_targets<F: Real>(
    episode: &EpisodeLog,
    params: &NetworkParams<F>,
    head: Head,
    trace_c: f64,
) -> Result<Vec<f64>, AcerError> {
    let trace = params.forward_sequence(episode.transitions.iter().map(|t| (t.obs.as_slice(), t.mask)))?;
    let outputs: Vec<_> = trace.steps.iter().map(|s| &s.outputs).collect();
    retrace_from_outputs(&episode.transitions, &outputs, head, trace_c)
}
