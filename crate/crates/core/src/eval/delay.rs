use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::policy::{Decision, Policy};
use crate::arena::{Arena, ArenaState, JointAction, Side};
use crate::error::NetError;

/// Distribution of the reaction delay in ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDistribution {
    /// `(ticks, probability)` pairs; probabilities sum to one.
    pub support: Vec<(u32, f64)>,
}

impl DelayDistribution {
    /// Two ticks with probability 0.7, three with 0.3: a mean of 2.3 ticks.
    pub fn reaction() -> Self {
        DelayDistribution { support: vec![(2, 0.7), (3, 0.3)] }
    }

    pub fn constant(ticks: u32) -> Self {
        DelayDistribution { support: vec![(ticks, 1.0)] }
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|&(d, p)| f64::from(d) * p).sum()
    }

    pub fn max(&self) -> u32 {
        self.support.iter().map(|&(d, _)| d).max().unwrap_or(0)
    }

    /// Draw a delay. A single-point distribution consumes no randomness.
    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        if let [(d, _)] = self.support[..] {
            return d;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(d, p) in &self.support {
            acc += p;
            if u < acc {
                return d;
            }
        }
        self.support.last().map_or(0, |&(d, _)| d)
    }
}

/// Counters over applied ticks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DelayStats {
    pub applied: u64,
    pub delay_sum: u64,
    /// Ticks whose source state was already acted on, so the skill was held back.
    pub repeats: u64,
    /// Skills chosen on a stale state but no longer available, replaced by no-op.
    pub invalidated: u64,
}

impl DelayStats {
    pub fn mean_delay(&self) -> f64 {
        if self.applied == 0 {
            0.0
        } else {
            self.delay_sum as f64 / self.applied as f64
        }
    }
}

/// Runs the inner policy on a state that is `d` ticks old, with `d` drawn per tick.
///
/// The source tick never moves backwards, so decisions are applied in the order they were
/// made. When the source tick repeats, the previous move is held and no skill is used.
/// Early ticks whose source would precede the episode use the first state.
pub struct DelayedPolicy<P> {
    pub inner: P,
    pub delay: DelayDistribution,
    history: VecDeque<ArenaState>,
    last_source: Option<u32>,
    last_action: JointAction,
    pub stats: DelayStats,
    /// Source tick of each applied tick, for inspection.
    pub sources: Vec<u32>,
    pub record_sources: bool,
}

impl<P: Policy> DelayedPolicy<P> {
    pub fn new(inner: P, delay: DelayDistribution) -> Self {
        DelayedPolicy {
            inner,
            delay,
            history: VecDeque::new(),
            last_source: None,
            last_action: JointAction::IDLE,
            stats: DelayStats::default(),
            sources: Vec::new(),
            record_sources: false,
        }
    }
}

/// Wrap `policy` with the reaction delay used for matches against people.
pub fn apply_reaction_delay<P: Policy>(policy: P) -> DelayedPolicy<P> {
    DelayedPolicy::new(policy, DelayDistribution::reaction())
}

impl<P: Policy> Policy for DelayedPolicy<P> {
    fn reset(&mut self) {
        self.inner.reset();
        self.history.clear();
        self.last_source = None;
        self.last_action = JointAction::IDLE;
        self.sources.clear();
    }

    fn act(&mut self, arena: &Arena, state: &ArenaState, side: Side, rng: &mut ChaCha8Rng) -> Result<Decision, NetError> {
        self.history.push_back(state.clone());
        let keep = self.delay.max() as usize + 1;
        while self.history.len() > keep {
            self.history.pop_front();
        }
        let d = self.delay.sample(rng);
        let now = state.tick;
        let oldest = self.history.front().map_or(now, |s| s.tick);
        let mut source = now.saturating_sub(d).max(oldest);
        if let Some(last) = self.last_source {
            source = source.max(last);
        }
        if self.record_sources {
            self.sources.push(source);
        }
        if now >= d {
            self.stats.applied += 1;
            self.stats.delay_sum += u64::from(now - source);
        }

        if self.last_source == Some(source) {
            self.stats.repeats += 1;
            let action = JointAction::new(0, self.last_action.mv);
            return Ok(Decision::plain(action));
        }
        self.last_source = Some(source);
        let past = &self.history[(source - oldest) as usize];
        let mut decision = self.inner.act(arena, past, side, rng)?;
        if !arena.available_skills(state, side).get(decision.action.skill) {
            self.stats.invalidated += 1;
            decision.action.skill = 0;
        }
        self.last_action = decision.action;
        Ok(decision)
    }

    fn name(&self) -> String {
        format!("{}+delay", self.inner.name())
    }
}
