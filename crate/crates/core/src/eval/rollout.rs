use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::Policy;
use crate::arena::reward::style_reward_for;
use crate::arena::{Arena, JointAction, Outcome, Side, StyleConfig};
use crate::error::EvalError;
use crate::pipeline::RawTick;

/// Summary of one finished match, from the agent side's point of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub seed: u64,
    pub outcome: Outcome,
    pub ticks: u32,
    /// Damage dealt by `[agent, opponent]`.
    pub damage_dealt: [f64; 2],
    pub final_hp: [f64; 2],
    /// Skill usage per side, counted over ticks where the side had a real choice.
    pub skill_counts: [Vec<u64>; 2],
    /// Both actions of every tick, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<[JointAction; 2]>>,
}

impl MatchResult {
    pub fn winner(&self) -> Option<Side> {
        self.outcome.winner()
    }

    /// Game length in seconds.
    pub fn seconds(&self, arena: &Arena) -> f64 {
        f64::from(self.ticks) * arena.roster().arena.tick_seconds
    }
}

/// Options for [`play_episode`].
#[derive(Debug, Clone, Copy, Default)]
pub struct EpisodeOptions<'a> {
    /// Reward used for the agent's raw ticks; `None` skips recording entirely.
    pub record_reward: Option<&'a StyleConfig>,
    pub record_trace: bool,
}

/// Play one match to termination. Both policies draw from one RNG seeded with `seed`,
/// the agent first, so the result is a pure function of the policies and the seed.
pub fn play_episode(
    arena: &Arena,
    agent: &mut dyn Policy,
    opponent: &mut dyn Policy,
    seed: u64,
    opts: EpisodeOptions<'_>,
) -> Result<(MatchResult, Vec<RawTick>), EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    agent.reset();
    opponent.reset();
    let mut state = arena.reset(seed);
    let n = arena.num_skills();
    let mut damage = [0.0; 2];
    let mut counts = [vec![0u64; n], vec![0u64; n]];
    let mut raw = Vec::new();
    let mut trace = opts.record_trace.then(Vec::new);

    while !state.done {
        let da = agent.act(arena, &state, Side::Agent, &mut rng)?;
        let db = opponent.act(arena, &state, Side::Opponent, &mut rng)?;
        for (side, d) in [(Side::Agent, &da), (Side::Opponent, &db)] {
            if !arena.available_skills(&state, side).is_noop_only() {
                counts[side.index()][d.action.skill] += 1;
            }
        }
        let step = arena.step(&state, da.action, db.action)?;
        damage[0] += state.opponent.hp - step.state.opponent.hp;
        damage[1] += state.agent.hp - step.state.agent.hp;
        if let Some(t) = trace.as_mut() {
            t.push([da.action, db.action]);
        }
        if let (Some(cfg), Some(rec)) = (opts.record_reward, da.record) {
            raw.push(RawTick {
                tick: state.tick,
                obs: rec.obs,
                mask: rec.mask,
                action: da.action,
                behavior_skill: rec.behavior_skill,
                behavior_move: rec.behavior_move,
                reward: style_reward_for(&state, &step.state, cfg, Side::Agent),
                move_phase: rec.move_phase,
            });
        }
        state = step.state;
    }

    let result = MatchResult {
        seed,
        outcome: state.outcome,
        ticks: state.tick,
        damage_dealt: damage,
        final_hp: [state.agent.hp, state.opponent.hp],
        skill_counts: counts,
        trace,
    };
    Ok((result, raw))
}

/// Re-run a recorded action trace and return the final outcome and length.
pub fn replay_trace(arena: &Arena, seed: u64, trace: &[[JointAction; 2]]) -> Result<(Outcome, u32), EvalError> {
    let mut state = arena.reset(seed);
    for [a, b] in trace {
        state = arena.step(&state, *a, *b)?.state;
    }
    Ok((state.outcome, state.tick))
}
