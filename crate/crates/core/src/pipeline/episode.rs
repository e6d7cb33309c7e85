use serde::{Deserialize, Serialize};

use crate::arena::{JointAction, Outcome, SkillMask, Style};

/// One retained decision point of an episode, as used by the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Tick of the raw episode this transition was taken at.
    pub tick: u32,
    pub obs: Vec<f32>,
    pub mask: SkillMask,
    pub action: JointAction,
    /// Behavior skill distribution at collection time.
    pub behavior_skill: Vec<f64>,
    /// Behavior move distribution; present only where a fresh move decision was made.
    pub behavior_move: Option<Vec<f64>>,
    /// Reward of this tick plus the discounted rewards of skipped ticks that follow it.
    pub reward: f64,
    /// `gamma^d`, `d` = ticks to the next retained transition.
    pub gap_discount: f64,
    pub terminal: bool,
}

impl Transition {
    /// Behavior probabilities of the taken skill and (at decision ticks) the taken move.
    pub fn behavior_probs(&self) -> (f64, Option<f64>) {
        (
            self.behavior_skill[self.action.skill],
            self.behavior_move.as_ref().map(|m| m[self.action.mv]),
        )
    }

    pub fn is_move_decision(&self) -> bool {
        self.behavior_move.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SnapshotKey {
    pub style: Style,
    pub id: u64,
}

/// Who the agent played against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OpponentRef {
    Snapshot(SnapshotKey),
    /// The learner's own current parameters (pool not ready).
    MirrorSelf,
    Scripted,
    Human,
}

/// Match record shipped from a simulator to its learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub style: Style,
    /// Learner step of the parameters the agent played with.
    pub agent_version: u64,
    pub opponent: OpponentRef,
    pub outcome: Outcome,
    /// Length of the raw episode in ticks.
    pub ticks: u32,
    /// Discounted reward of passive ticks before the first retained one.
    pub leading_return: f64,
    pub transitions: Vec<Transition>,
}

impl EpisodeLog {
    /// Discounted return from tick 0 reconstructed from the retained transitions.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.leading_return
            + self
                .transitions
                .iter()
                .map(|t| gamma.powi(t.tick as i32) * t.reward)
                .sum::<f64>()
    }

    pub fn check(&self) -> Result<(), String> {
        let terminals = self.transitions.iter().filter(|t| t.terminal).count();
        if terminals != 1 || !self.transitions.last().is_some_and(|t| t.terminal) {
            return Err("episode must end with exactly one terminal transition".into());
        }
        for t in &self.transitions {
            let (mu_s, mu_m) = t.behavior_probs();
            if !(mu_s > 0.0 && mu_s <= 1.0) || mu_m.is_some_and(|m| !(m > 0.0 && m <= 1.0)) {
                return Err(format!("tick {}: behavior probability out of (0, 1]", t.tick));
            }
            if !(t.gap_discount > 0.0 && t.gap_discount <= 1.0) || !t.reward.is_finite() {
                return Err(format!("tick {}: bad reward or gap discount", t.tick));
            }
        }
        Ok(())
    }
}
