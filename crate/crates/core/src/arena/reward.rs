//! Base rewards (win and HP margin) and the style-shaped reward.

use serde::{Deserialize, Serialize};

use super::state::{ArenaState, Outcome, Side};
use crate::error::ConfigError;

pub const WIN_REWARD: f64 = 10.0;

/// Discount factor used throughout training.
pub const GAMMA: f64 = 0.995;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Aggressive,
    Balanced,
    Defensive,
    Baseline,
}

impl Style {
    pub const SHAPED: [Style; 3] = [Style::Aggressive, Style::Balanced, Style::Defensive];

    pub fn name(self) -> &'static str {
        match self {
            Style::Aggressive => "aggressive",
            Style::Balanced => "balanced",
            Style::Defensive => "defensive",
            Style::Baseline => "baseline",
        }
    }

    pub fn config(self) -> StyleConfig {
        match self {
            Style::Aggressive => StyleConfig::new(0.008, 0.5, 0.5, 0.002),
            Style::Balanced => StyleConfig::new(0.004, 0.5, 0.5, 0.0002),
            Style::Defensive => StyleConfig::new(0.0, 0.6, 0.4, 0.0),
            Style::Baseline => StyleConfig::new(0.0, 0.5, 0.5, 0.0),
        }
    }
}

impl std::fmt::Display for Style {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Style {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "aggressive" => Ok(Style::Aggressive),
            "balanced" => Ok(Style::Balanced),
            "defensive" => Ok(Style::Defensive),
            "baseline" => Ok(Style::Baseline),
            other => Err(ConfigError::Invalid(format!("unknown style `{other}`"))),
        }
    }
}

/// Reward weights for one play style.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleConfig {
    /// Penalty per tick.
    pub time_penalty: f64,
    pub hp_ratio_own: f64,
    pub hp_ratio_opp: f64,
    /// Penalty per meter of separation per tick.
    pub distance_penalty: f64,
}

impl StyleConfig {
    pub const fn new(time_penalty: f64, hp_ratio_own: f64, hp_ratio_opp: f64, distance_penalty: f64) -> Self {
        StyleConfig { time_penalty, hp_ratio_own, hp_ratio_opp, distance_penalty }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.time_penalty < 0.0 || self.distance_penalty < 0.0 {
            return Err(ConfigError::Invalid("style penalties must be non-negative".into()));
        }
        if (self.hp_ratio_own + self.hp_ratio_opp - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Invalid("style HP ratios must sum to 1".into()));
        }
        Ok(())
    }
}

/// Change in HP margin for `side`: own HP change minus opponent HP change.
pub fn hp_reward(prev: &ArenaState, next: &ArenaState, side: Side) -> f64 {
    let own = next.player(side).hp - prev.player(side).hp;
    let opp = next.player(side.other()).hp - prev.player(side.other()).hp;
    own - opp
}

/// +10 / -10 on a terminal win / loss for `side`, 0 otherwise.
pub fn win_reward(next: &ArenaState, side: Side) -> f64 {
    match (next.outcome, side) {
        (Outcome::AgentWin, Side::Agent) | (Outcome::OpponentWin, Side::Opponent) => WIN_REWARD,
        (Outcome::AgentWin, Side::Opponent) | (Outcome::OpponentWin, Side::Agent) => -WIN_REWARD,
        _ => 0.0,
    }
}

pub fn base_reward(prev: &ArenaState, next: &ArenaState) -> f64 {
    base_reward_for(prev, next, Side::Agent)
}

pub fn base_reward_for(prev: &ArenaState, next: &ArenaState, side: Side) -> f64 {
    hp_reward(prev, next, side) + win_reward(next, side)
}

pub fn style_reward(prev: &ArenaState, next: &ArenaState, cfg: &StyleConfig) -> f64 {
    style_reward_for(prev, next, cfg, Side::Agent)
}

/// `2 (w_own dHP_own - w_opp dHP_opp) - time - distance_penalty * distance + win`.
///
/// With equal ratios the HP term reduces to the plain HP-margin reward.
pub fn style_reward_for(prev: &ArenaState, next: &ArenaState, cfg: &StyleConfig, side: Side) -> f64 {
    let own = next.player(side).hp - prev.player(side).hp;
    let opp = next.player(side.other()).hp - prev.player(side.other()).hp;
    let hp_term = 2.0 * (cfg.hp_ratio_own * own - cfg.hp_ratio_opp * opp);
    hp_term - cfg.time_penalty - cfg.distance_penalty * next.distance() + win_reward(next, side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::Arena;

    fn pair(ag: (f64, f64), op: (f64, f64)) -> (ArenaState, ArenaState) {
        let arena = Arena::default();
        let mut prev = arena.reset(0);
        prev.agent.hp = ag.0;
        prev.opponent.hp = op.0;
        let mut next = prev.clone();
        next.tick = 1;
        next.agent.hp = ag.1;
        next.opponent.hp = op.1;
        (prev, next)
    }

    #[test]
    fn table_weights() {
        assert_eq!(Style::Aggressive.config(), StyleConfig::new(0.008, 0.5, 0.5, 0.002));
        assert_eq!(Style::Balanced.config(), StyleConfig::new(0.004, 0.5, 0.5, 0.0002));
        assert_eq!(Style::Defensive.config(), StyleConfig::new(0.0, 0.6, 0.4, 0.0));
        for s in [Style::Aggressive, Style::Balanced, Style::Defensive, Style::Baseline] {
            s.config().validate().unwrap();
        }
    }

    #[test]
    fn hp_margin_example() {
        let (prev, next) = pair((10.0, 9.0), (10.0, 7.0));
        assert_eq!(base_reward(&prev, &next), 2.0);
        assert_eq!(base_reward_for(&prev, &next, Side::Opponent), -2.0);
        let (prev, next) = pair((10.0, 10.0), (10.0, 10.0));
        assert_eq!(base_reward(&prev, &next), 0.0);
    }

    #[test]
    fn terminal_win_adds_ten() {
        let (prev, mut next) = pair((5.0, 5.0), (1.0, 0.0));
        next.done = true;
        next.outcome = Outcome::AgentWin;
        assert_eq!(win_reward(&next, Side::Agent), 10.0);
        assert_eq!(base_reward(&prev, &next), 11.0);
        assert_eq!(base_reward_for(&prev, &next, Side::Opponent), -11.0);
    }

    #[test]
    fn aggressive_penalties() {
        let (prev, mut next) = pair((10.0, 10.0), (10.0, 10.0));
        next.agent.position = [-2.5, 0.0];
        next.opponent.position = [2.5, 0.0];
        let r = style_reward(&prev, &next, &Style::Aggressive.config());
        assert!((r - (-0.018)).abs() < 1e-12, "{r}");
    }

    #[test]
    fn defensive_ratio() {
        let (prev, next) = pair((10.0, 9.0), (10.0, 10.0));
        let r = style_reward(&prev, &next, &Style::Defensive.config());
        assert!((r - (-1.2)).abs() < 1e-12, "{r}");
    }

    #[test]
    fn equal_ratio_reproduces_hp_margin() {
        let (prev, next) = pair((10.0, 9.3), (8.0, 7.1));
        let r = style_reward(&prev, &next, &Style::Baseline.config());
        assert_eq!(r, base_reward(&prev, &next));
    }
}
