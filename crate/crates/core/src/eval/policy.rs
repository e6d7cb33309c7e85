use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{Arena, ArenaState, JointAction, Side, SkillMask};
use crate::error::NetError;
use crate::pipeline::{MoveMaintainer, DEFAULT_MAINTENANCE};
use crate::policy::{argmax, sample_index, NetworkParams, RecurrentState};

/// What a learning policy saw and how it chose, kept for building training transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub obs: Vec<f32>,
    pub mask: SkillMask,
    pub behavior_skill: Vec<f64>,
    pub behavior_move: Option<Vec<f64>>,
    pub move_phase: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: JointAction,
    pub record: Option<DecisionRecord>,
}

impl Decision {
    pub fn plain(action: JointAction) -> Self {
        Decision { action, record: None }
    }
}

/// Anything that can control one side of a match.
pub trait Policy: Send {
    /// Clear per-episode state.
    fn reset(&mut self);

    fn act(&mut self, arena: &Arena, state: &ArenaState, side: Side, rng: &mut ChaCha8Rng) -> Result<Decision, NetError>;

    fn name(&self) -> String;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn reset(&mut self) {
        (**self).reset()
    }

    fn act(&mut self, arena: &Arena, state: &ArenaState, side: Side, rng: &mut ChaCha8Rng) -> Result<Decision, NetError> {
        (**self).act(arena, state, side, rng)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

/// A recurrent network policy with move maintenance and optional passive no-op skipping.
///
/// Skipped ticks do not advance the recurrent state, so replaying the retained transitions
/// through [`NetworkParams::forward_sequence`] reproduces the distributions seen here.
#[derive(Debug, Clone)]
pub struct NetPolicy {
    params: Arc<NetworkParams<f32>>,
    hidden: RecurrentState<f32>,
    maintainer: MoveMaintainer,
    pub skip_passive: bool,
    pub greedy: bool,
    label: String,
}

impl NetPolicy {
    pub fn new(params: Arc<NetworkParams<f32>>) -> Self {
        let hidden = RecurrentState::zeros(params.shape().hidden);
        NetPolicy {
            params,
            hidden,
            maintainer: MoveMaintainer::new(DEFAULT_MAINTENANCE),
            skip_passive: true,
            greedy: false,
            label: "net".into(),
        }
    }

    pub fn with_maintenance(mut self, window: u32) -> Self {
        self.maintainer = MoveMaintainer::new(window);
        self
    }

    pub fn with_skip_passive(mut self, skip: bool) -> Self {
        self.skip_passive = skip;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn params(&self) -> &Arc<NetworkParams<f32>> {
        &self.params
    }

    /// Swap in new parameters; takes effect from the next episode's perspective but is applied immediately.
    pub fn set_params(&mut self, params: Arc<NetworkParams<f32>>) {
        self.params = params;
    }
}

fn as_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

impl Policy for NetPolicy {
    fn reset(&mut self) {
        self.hidden = RecurrentState::zeros(self.params.shape().hidden);
        self.maintainer.reset();
    }

    fn act(&mut self, arena: &Arena, state: &ArenaState, side: Side, rng: &mut ChaCha8Rng) -> Result<Decision, NetError> {
        let obs = arena.observe(state, side);
        let mask = arena.available_skills(state, side);
        if self.skip_passive && mask.is_noop_only() {
            let tick = self.maintainer.step(false, || unreachable!("skipped ticks never decide"));
            let mut behavior_skill = vec![0.0; mask.len()];
            behavior_skill[0] = 1.0;
            return Ok(Decision {
                action: JointAction::new(0, tick.mv),
                record: Some(DecisionRecord { obs, mask, behavior_skill, behavior_move: None, move_phase: tick.phase }),
            });
        }
        let (out, hidden) = self.params.forward(&obs, &self.hidden, mask)?;
        self.hidden = hidden;
        let skill = if self.greedy { argmax(&out.skill_probs) } else { sample_index(&out.skill_probs, rng) };
        let greedy = self.greedy;
        let tick = self.maintainer.step(true, || {
            if greedy {
                argmax(&out.move_probs)
            } else {
                sample_index(&out.move_probs, rng)
            }
        });
        Ok(Decision {
            action: JointAction::new(skill, tick.mv),
            record: Some(DecisionRecord {
                obs,
                mask,
                behavior_skill: as_f64(&out.skill_probs),
                behavior_move: tick.decided.then(|| as_f64(&out.move_probs)),
                move_phase: tick.phase,
            }),
        })
    }

    fn name(&self) -> String {
        self.label.clone()
    }
}

/// Never acts.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoOpPolicy;

impl Policy for NoOpPolicy {
    fn reset(&mut self) {}

    fn act(&mut self, _: &Arena, _: &ArenaState, _: Side, _: &mut ChaCha8Rng) -> Result<Decision, NetError> {
        Ok(Decision::plain(JointAction::IDLE))
    }

    fn name(&self) -> String {
        "noop".into()
    }
}

fn toward(state: &ArenaState, side: Side) -> [f64; 2] {
    let me = state.player(side).position;
    let them = state.player(side.other()).position;
    [them[0] - me[0], them[1] - me[1]]
}

fn approach(state: &ArenaState, side: Side, skill: usize) -> JointAction {
    let dir = Arena::nearest_direction(side, toward(state, side));
    JointAction::from_parts(skill, Some(dir), true)
}

fn hold(skill: usize) -> JointAction {
    JointAction::from_parts(skill, None, true)
}

/// Walks up to the opponent and uses a single skill whenever it is available and in range.
#[derive(Debug, Clone, Copy)]
pub struct SingleAttackPolicy {
    pub skill: usize,
}

impl Policy for SingleAttackPolicy {
    fn reset(&mut self) {}

    fn act(&mut self, arena: &Arena, state: &ArenaState, side: Side, _: &mut ChaCha8Rng) -> Result<Decision, NetError> {
        let range = arena.roster().skill(self.skill).range;
        let mask = arena.available_skills(state, side);
        let action = if state.distance() > range * 0.9 {
            approach(state, side, 0)
        } else if mask.get(self.skill) {
            hold(self.skill)
        } else {
            hold(0)
        };
        Ok(Decision::plain(action))
    }

    fn name(&self) -> String {
        format!("single-attack-{}", self.skill)
    }
}

/// Tuning of the finite-state built-in opponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedConfig {
    /// Enter retreat when SP falls below this.
    pub retreat_sp: f64,
    /// Leave retreat once SP has recovered to this.
    pub resume_sp: f64,
    /// Fraction of the shortest attack range at which to stop approaching.
    pub engage_fraction: f64,
    /// Skills tried in order while in range.
    pub attack_priority: [usize; 5],
    /// Probability of attacking on a tick where an attack is possible.
    pub attack_chance: f64,
}

impl Default for ScriptedConfig {
    fn default() -> Self {
        ScriptedConfig { retreat_sp: 2.0, resume_sp: 6.0, engage_fraction: 0.85, attack_priority: [4, 5, 2, 6, 1], attack_chance: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Approach,
    Attack,
    Retreat,
}

/// Hand-written built-in opponent: approach, attack in range, retreat while SP is low.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    pub config: ScriptedConfig,
    mode: Mode,
}

impl ScriptedPolicy {
    pub fn new(config: ScriptedConfig) -> Self {
        ScriptedPolicy { config, mode: Mode::Approach }
    }
}

impl Default for ScriptedPolicy {
    fn default() -> Self {
        ScriptedPolicy::new(ScriptedConfig::default())
    }
}

impl Policy for ScriptedPolicy {
    fn reset(&mut self) {
        self.mode = Mode::Approach;
    }

    fn act(&mut self, arena: &Arena, state: &ArenaState, side: Side, rng: &mut ChaCha8Rng) -> Result<Decision, NetError> {
        let me = state.player(side);
        let mask = arena.available_skills(state, side);
        let engage = arena.roster().skill(1).range * self.config.engage_fraction;
        let dist = state.distance();

        self.mode = match self.mode {
            Mode::Retreat if me.sp < self.config.resume_sp => Mode::Retreat,
            _ if me.sp < self.config.retreat_sp => Mode::Retreat,
            _ if dist > engage => Mode::Approach,
            _ => Mode::Attack,
        };

        let action = match self.mode {
            Mode::Retreat => {
                let t = toward(state, side);
                let dir = Arena::nearest_direction(side, [-t[0], -t[1]]);
                let guard = if dist < engage && mask.get(9) { 9 } else { 0 };
                JointAction::from_parts(guard, Some(dir), false)
            }
            Mode::Approach => approach(state, side, 0),
            Mode::Attack if self.config.attack_chance < 1.0 && !rng.random_bool(self.config.attack_chance) => hold(0),
            Mode::Attack => {
                let skill = self
                    .config
                    .attack_priority
                    .iter()
                    .copied()
                    .find(|&s| s < mask.len() && mask.get(s) && arena.roster().skill(s).range >= dist)
                    .unwrap_or(0);
                hold(skill)
            }
        };
        Ok(Decision::plain(action))
    }

    fn name(&self) -> String {
        "scripted".into()
    }
}
