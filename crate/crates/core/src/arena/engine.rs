use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{CcKind, DashKind, Roster, SkillFunction};
use super::mask::SkillMask;
use super::reward::hp_reward;
use super::state::{ArenaState, CombatantState, JointAction, Outcome, Side, Status, MOVE_ACTIONS};
use crate::error::ArenaError;

/// Unit vectors for the eight move directions in a player's own frame.
const DIRECTIONS: [[f64; 2]; 8] = [
    [1.0, 0.0],
    [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
    [0.0, 1.0],
    [-FRAC_1_SQRT_2, FRAC_1_SQRT_2],
    [-1.0, 0.0],
    [-FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
    [0.0, -1.0],
    [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
];

/// Closest a dash toward the opponent will bring the two fighters.
const DASH_STOP_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Used,
    Hit,
    Missed,
    CrowdControlled,
    Resisted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArenaEvent {
    pub side: Side,
    pub skill: usize,
    pub kind: EventKind,
    #[serde(default)]
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: ArenaState,
    /// Base reward (HP margin change plus terminal win reward) for the agent side.
    pub reward_agent: f64,
    pub reward_opponent: f64,
    pub events: Vec<ArenaEvent>,
}

impl StepResult {
    pub fn reward(&self, side: Side) -> f64 {
        match side {
            Side::Agent => self.reward_agent,
            Side::Opponent => self.reward_opponent,
        }
    }
}

/// The game rules bound to a roster. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Arena {
    roster: Arc<Roster>,
    /// Skill ids with a prerequisite, in id order; they get a combo entry in observations.
    combo_skills: Arc<Vec<usize>>,
}

impl Default for Arena {
    fn default() -> Self {
        Arena::new(Roster::default())
    }
}

fn norm(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn unit_or(v: [f64; 2], fallback: [f64; 2]) -> [f64; 2] {
    let n = norm(v);
    if n > 0.0 {
        [v[0] / n, v[1] / n]
    } else {
        fallback
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl Arena {
    pub fn new(roster: Roster) -> Self {
        let combo_skills = roster
            .skills()
            .iter()
            .filter(|s| s.prerequisite.is_some())
            .map(|s| s.id)
            .collect();
        Arena {
            roster: Arc::new(roster),
            combo_skills: Arc::new(combo_skills),
        }
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn num_skills(&self) -> usize {
        self.roster.len()
    }

    pub fn max_ticks(&self) -> u32 {
        self.roster.arena.max_ticks
    }

    /// Length of the vector produced by [`Arena::observe`].
    pub fn observation_len(&self) -> usize {
        15 + (self.num_skills() - 1) + 10 + self.combo_skills.len()
    }

    pub fn reset(&self, seed: u64) -> ArenaState {
        let a = &self.roster.arena;
        let n = self.num_skills();
        let half = a.spawn_distance / 2.0;
        let fresh = |x: f64, fx: f64| CombatantState {
            position: [x, 0.0],
            hp: a.max_hp,
            sp: a.max_sp,
            cooldowns: vec![0; n],
            combo_windows: vec![0; n],
            status: Status::Normal,
            facing: [fx, 0.0],
        };
        ArenaState {
            tick: 0,
            seed,
            agent: fresh(-half, 1.0),
            opponent: fresh(half, -1.0),
            done: false,
            outcome: Outcome::Ongoing,
        }
    }

    pub fn available_skills(&self, state: &ArenaState, side: Side) -> SkillMask {
        let me = state.player(side);
        let mut mask = SkillMask::only_noop(self.num_skills());
        if state.done || !me.status.can_act() {
            return mask;
        }
        for skill in &self.roster.skills()[1..] {
            let ready = me.cooldowns[skill.id] == 0 && me.sp >= skill.sp_cost;
            let unlocked = skill
                .prerequisite
                .is_none_or(|_| me.combo_windows[skill.id] > 0);
            if ready && unlocked {
                mask.set(skill.id, true);
            }
        }
        mask
    }

    fn validate(&self, state: &ArenaState, side: Side, action: JointAction) -> Result<(), ArenaError> {
        if action.skill >= self.num_skills() || action.mv >= MOVE_ACTIONS {
            return Err(ArenaError::InvalidAction {
                side,
                skill: action.skill,
                mv: action.mv,
            });
        }
        if !self.available_skills(state, side).get(action.skill) {
            return Err(ArenaError::RejectedAction {
                side,
                skill: action.skill,
            });
        }
        Ok(())
    }

    /// The move direction (in `side`'s frame) closest to the world-space vector `v`.
    pub fn nearest_direction(side: Side, v: [f64; 2]) -> usize {
        let f = side.frame_sign();
        let local = [f * v[0], f * v[1]];
        (0..DIRECTIONS.len())
            .max_by(|&a, &b| dot(DIRECTIONS[a], local).total_cmp(&dot(DIRECTIONS[b], local)))
            .unwrap_or(0)
    }

    fn world_direction(side: Side, dir: usize) -> [f64; 2] {
        let f = side.frame_sign();
        [f * DIRECTIONS[dir][0], f * DIRECTIONS[dir][1]]
    }

    fn clamp_to_arena(&self, p: [f64; 2]) -> [f64; 2] {
        let r = self.roster.arena.radius;
        let n = norm(p);
        if n > r {
            [p[0] * (r / n), p[1] * (r / n)]
        } else {
            p
        }
    }

    fn in_reach(&self, attacker: &CombatantState, target: &CombatantState, range: f64) -> bool {
        let to = sub(target.position, attacker.position);
        let d = norm(to);
        if d > range {
            return false;
        }
        if d == 0.0 {
            return true;
        }
        let half_cone = (self.roster.arena.hit_cone_degrees / 2.0).to_radians();
        dot(attacker.facing, to) / d >= half_cone.cos()
    }

    /// Advance one tick with both actions resolved simultaneously.
    ///
    /// Resolution order: resistance/escape/dash activations, movement, crowd control
    /// (blocked by resistance), then damage. Every phase reads the two players from the
    /// same snapshot, so the result does not depend on which player is processed first.
    pub fn step(
        &self,
        state: &ArenaState,
        a_agent: JointAction,
        a_opponent: JointAction,
    ) -> Result<StepResult, ArenaError> {
        if state.done {
            return Err(ArenaError::Terminated);
        }
        self.validate(state, Side::Agent, a_agent)?;
        self.validate(state, Side::Opponent, a_opponent)?;

        let cfg = &self.roster.arena;
        let sides = [Side::Agent, Side::Opponent];
        let actions = [a_agent, a_opponent];
        let acting = [state.agent.status.can_act(), state.opponent.status.can_act()];
        let mut events = Vec::new();

        let mut next = state.clone();
        next.tick += 1;

        // Timers and regeneration.
        for side in sides {
            let p = next.player_mut(side);
            for c in p.cooldowns.iter_mut().chain(p.combo_windows.iter_mut()) {
                *c = c.saturating_sub(1);
            }
            p.status = p.status.tick_down();
            p.sp = (p.sp + cfg.sp_regen).min(cfg.max_sp);
        }

        // Phase 1: pay costs, resistance, escape and dash displacement.
        let mut displaced: [Option<[f64; 2]>; 2] = [None, None];
        for (i, side) in sides.into_iter().enumerate() {
            let action = actions[i];
            if action.skill == 0 {
                continue;
            }
            let skill = self.roster.skill(action.skill);
            let me = state.player(side);
            let other = state.player(side.other());
            events.push(ArenaEvent { side, skill: skill.id, kind: EventKind::Used, amount: 0.0 });
            {
                let p = next.player_mut(side);
                p.sp = (p.sp - skill.sp_cost).max(0.0);
                p.cooldowns[skill.id] = skill.cooldown;
                if skill.prerequisite.is_some() {
                    p.combo_windows[skill.id] = 0;
                }
            }
            let away = unit_or(sub(me.position, other.position), [-me.facing[0], -me.facing[1]]);
            match skill.function {
                SkillFunction::Resistance => {
                    next.player_mut(side).status = Status::Resistant(skill.resist_duration);
                }
                SkillFunction::Escape => {
                    let d = skill.displacement;
                    let target = [me.position[0] + away[0] * d, me.position[1] + away[1] * d];
                    next.player_mut(side).position = self.clamp_to_arena(target);
                    displaced[i] = Some(away);
                }
                SkillFunction::Dash => {
                    let (dir, travel) = match skill.dash.unwrap_or(DashKind::TowardOpponent) {
                        DashKind::TowardOpponent => {
                            let gap = norm(sub(other.position, me.position));
                            ([-away[0], -away[1]], skill.displacement.min((gap - DASH_STOP_DISTANCE).max(0.0)))
                        }
                        DashKind::MoveDirection => {
                            let dir = action
                                .direction()
                                .map(|d| Self::world_direction(side, d))
                                .unwrap_or(me.facing);
                            (dir, skill.displacement)
                        }
                    };
                    let target = [me.position[0] + dir[0] * travel, me.position[1] + dir[1] * travel];
                    next.player_mut(side).position = self.clamp_to_arena(target);
                    displaced[i] = Some(dir);
                }
                SkillFunction::Damage | SkillFunction::CrowdControl => {}
            }
        }

        // Phase 2: movement and facing.
        let mut moved: [Option<[f64; 2]>; 2] = displaced;
        for (i, side) in sides.into_iter().enumerate() {
            if !acting[i] || displaced[i].is_some() {
                continue;
            }
            if let Some(d) = actions[i].direction() {
                let dir = Self::world_direction(side, d);
                let p = next.player_mut(side);
                let target = [
                    p.position[0] + dir[0] * cfg.move_speed,
                    p.position[1] + dir[1] * cfg.move_speed,
                ];
                p.position = self.clamp_to_arena(target);
                moved[i] = Some(dir);
            }
        }
        let positions = [next.agent.position, next.opponent.position];
        for (i, side) in sides.into_iter().enumerate() {
            if !acting[i] {
                continue;
            }
            let p = next.player_mut(side);
            if actions[i].faces_opponent() {
                p.facing = unit_or(sub(positions[1 - i], positions[i]), p.facing);
            } else if let Some(dir) = moved[i] {
                p.facing = dir;
            }
        }

        // Phases 3 and 4 read hits from the post-movement snapshot.
        let snapshot = next.clone();
        let mut hits = [false, false];
        for (i, side) in sides.into_iter().enumerate() {
            let skill = self.roster.skill(actions[i].skill);
            if skill.is_targeted() {
                hits[i] = self.in_reach(snapshot.player(side), snapshot.player(side.other()), skill.range);
                if !hits[i] {
                    events.push(ArenaEvent { side, skill: skill.id, kind: EventKind::Missed, amount: 0.0 });
                }
            }
        }

        // Phase 3: crowd control.
        for (i, side) in sides.into_iter().enumerate() {
            let skill = self.roster.skill(actions[i].skill);
            if !hits[i] {
                continue;
            }
            for unlocked in self.roster.unlocked_by(skill.id) {
                let window = unlocked.prerequisite.expect("filtered on prerequisite").window;
                next.player_mut(side).combo_windows[unlocked.id] = window;
            }
            let Some(kind) = skill.cc else { continue };
            if snapshot.player(side.other()).status.is_resistant() {
                events.push(ArenaEvent { side, skill: skill.id, kind: EventKind::Resisted, amount: 0.0 });
                continue;
            }
            let target = next.player_mut(side.other());
            let current = target.status;
            let incoming = match kind {
                CcKind::Stun => Status::Stunned(skill.cc_duration),
                CcKind::Knockdown => Status::KnockedDown(skill.cc_duration),
            };
            // A longer crowd control already in effect is kept.
            if current.can_act() || incoming.ticks() >= current.ticks() {
                target.status = incoming;
            }
            events.push(ArenaEvent {
                side,
                skill: skill.id,
                kind: EventKind::CrowdControlled,
                amount: f64::from(skill.cc_duration),
            });
        }

        // Phase 4: damage.
        for (i, side) in sides.into_iter().enumerate() {
            let skill = self.roster.skill(actions[i].skill);
            if !hits[i] || skill.damage <= 0.0 {
                continue;
            }
            let target = next.player_mut(side.other());
            target.hp = (target.hp - skill.damage).max(0.0);
            events.push(ArenaEvent { side, skill: skill.id, kind: EventKind::Hit, amount: skill.damage });
        }

        // Termination.
        let ag_dead = next.agent.hp <= 0.0;
        let op_dead = next.opponent.hp <= 0.0;
        if ag_dead || op_dead || next.tick >= cfg.max_ticks {
            next.done = true;
            next.outcome = match (ag_dead, op_dead) {
                (true, true) => Outcome::Draw,
                (true, false) => Outcome::OpponentWin,
                (false, true) => Outcome::AgentWin,
                (false, false) => {
                    if next.agent.hp > next.opponent.hp {
                        Outcome::AgentWin
                    } else if next.opponent.hp > next.agent.hp {
                        Outcome::OpponentWin
                    } else {
                        Outcome::Draw
                    }
                }
            };
        }

        let reward_agent = hp_reward(state, &next, Side::Agent) + super::reward::win_reward(&next, Side::Agent);
        let reward_opponent =
            hp_reward(state, &next, Side::Opponent) + super::reward::win_reward(&next, Side::Opponent);
        Ok(StepResult { state: next, reward_agent, reward_opponent, events })
    }

    /// Observation vector of `side`, expressed in that side's own frame.
    pub fn observe(&self, state: &ArenaState, side: Side) -> Vec<f32> {
        let cfg = &self.roster.arena;
        let me = state.player(side);
        let other = state.player(side.other());
        let f = side.frame_sign();
        let to_other = sub(other.position, me.position);
        let dist = norm(to_other);
        let toward = unit_or(to_other, [0.0, 0.0]);
        let longest = f64::from(self.roster.longest_cc());

        let mut obs = Vec::with_capacity(self.observation_len());
        obs.push(me.hp / cfg.max_hp);
        obs.push(other.hp / cfg.max_hp);
        obs.push(me.sp / cfg.max_sp);
        obs.push(other.sp / cfg.max_sp);
        obs.push((dist / (2.0 * cfg.radius)).min(1.0));
        obs.push(((cfg.radius - norm(me.position)) / cfg.radius).clamp(0.0, 1.0));
        obs.push(f * me.position[0] / cfg.radius);
        obs.push(f * me.position[1] / cfg.radius);
        obs.push(1.0 - f64::from(state.tick) / f64::from(cfg.max_ticks));
        obs.push(f * toward[0]);
        obs.push(f * toward[1]);
        obs.push(f * me.facing[0]);
        obs.push(f * me.facing[1]);
        obs.push(dot(me.facing, toward));
        obs.push(-dot(other.facing, toward));
        for skill in &self.roster.skills()[1..] {
            let frac = if skill.cooldown == 0 {
                0.0
            } else {
                f64::from(me.cooldowns[skill.id]) / f64::from(skill.cooldown)
            };
            obs.push(frac);
        }
        for p in [me, other] {
            let mut one_hot = [0.0; 4];
            one_hot[p.status.one_hot_index()] = 1.0;
            obs.extend_from_slice(&one_hot);
        }
        obs.push((f64::from(me.status.ticks()) / longest).min(1.0));
        obs.push((f64::from(other.status.ticks()) / longest).min(1.0));
        for &id in self.combo_skills.iter() {
            let window = self.roster.skill(id).prerequisite.map_or(1, |p| p.window);
            obs.push(f64::from(me.combo_windows[id]) / f64::from(window));
        }
        debug_assert_eq!(obs.len(), self.observation_len());
        obs.into_iter().map(|v| v as f32).collect()
    }
}
