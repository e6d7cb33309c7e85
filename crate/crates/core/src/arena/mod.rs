//! Deterministic tick-based two-player arena.

mod config;
mod engine;
mod mask;
pub mod reward;
mod state;

pub use config::{
    ArenaConfig, CcKind, DashKind, Prerequisite, Roster, SkillFunction, SkillSpec, ROSTER_VERSION,
};
pub use engine::{Arena, ArenaEvent, EventKind, StepResult};
pub use mask::SkillMask;
pub use reward::{base_reward, style_reward, Style, StyleConfig, GAMMA, WIN_REWARD};
pub use state::{
    ArenaState, CombatantState, JointAction, Outcome, Side, Status, MOVE_ACTIONS, NO_MOVE_DIRECTION,
};
