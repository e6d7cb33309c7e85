use rand::Rng;

use super::net::HeadOutputs;
use super::params::Real;
use crate::arena::JointAction;

/// Draw an index from `probs`. Zero-probability entries are never returned.
pub fn sample_index<F: Real, R: Rng + ?Sized>(probs: &[F], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.to_f64().unwrap_or(0.0);
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Sample skill and move independently; returns the probabilities of the sampled entries.
pub fn sample_action<F: Real, R: Rng + ?Sized>(outputs: &HeadOutputs<F>, rng: &mut R) -> (JointAction, [f64; 2]) {
    let skill = sample_index(&outputs.skill_probs, rng);
    let mv = sample_index(&outputs.move_probs, rng);
    let probs = [
        outputs.skill_probs[skill].to_f64().unwrap_or(0.0),
        outputs.move_probs[mv].to_f64().unwrap_or(0.0),
    ];
    (JointAction::new(skill, mv), probs)
}

/// Index of the largest probability (lowest index on ties).
pub fn argmax<F: Real>(probs: &[F]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}
