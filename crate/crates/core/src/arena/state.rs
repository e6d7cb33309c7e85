use serde::{Deserialize, Serialize};

/// Number of joint move/targeting actions: (8 directions + no move) x 2 targeting modes.
pub const MOVE_ACTIONS: usize = 18;
pub const NO_MOVE_DIRECTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Agent,
    Opponent,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Agent => Side::Opponent,
            Side::Opponent => Side::Agent,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Each side sees the arena from its own spawn; the opponent's frame is rotated half a turn.
    pub(crate) fn frame_sign(self) -> f64 {
        match self {
            Side::Agent => 1.0,
            Side::Opponent => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "ticks")]
pub enum Status {
    Normal,
    Stunned(u32),
    KnockedDown(u32),
    Resistant(u32),
}

impl Status {
    pub fn can_act(self) -> bool {
        matches!(self, Status::Normal | Status::Resistant(_))
    }

    pub fn is_resistant(self) -> bool {
        matches!(self, Status::Resistant(_))
    }

    pub fn ticks(self) -> u32 {
        match self {
            Status::Normal => 0,
            Status::Stunned(t) | Status::KnockedDown(t) | Status::Resistant(t) => t,
        }
    }

    pub fn one_hot_index(self) -> usize {
        match self {
            Status::Normal => 0,
            Status::Stunned(_) => 1,
            Status::KnockedDown(_) => 2,
            Status::Resistant(_) => 3,
        }
    }

    pub(crate) fn tick_down(self) -> Status {
        match self {
            Status::Normal => Status::Normal,
            Status::Stunned(t) | Status::KnockedDown(t) | Status::Resistant(t) if t <= 1 => Status::Normal,
            Status::Stunned(t) => Status::Stunned(t - 1),
            Status::KnockedDown(t) => Status::KnockedDown(t - 1),
            Status::Resistant(t) => Status::Resistant(t - 1),
        }
    }
}

/// One skill decision plus one joint move/targeting decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct JointAction {
    pub skill: usize,
    #[serde(rename = "move")]
    pub mv: usize,
}

impl JointAction {
    pub const IDLE: JointAction = JointAction {
        skill: 0,
        mv: NO_MOVE_DIRECTION * 2,
    };

    pub fn new(skill: usize, mv: usize) -> Self {
        JointAction { skill, mv }
    }

    pub fn from_parts(skill: usize, direction: Option<usize>, face_opponent: bool) -> Self {
        let dir = direction.unwrap_or(NO_MOVE_DIRECTION);
        JointAction {
            skill,
            mv: dir * 2 + usize::from(!face_opponent),
        }
    }

    /// Direction index 0..8 (multiples of 45 degrees in the player's own frame), or `None`.
    pub fn direction(&self) -> Option<usize> {
        let d = self.mv / 2;
        (d < NO_MOVE_DIRECTION).then_some(d)
    }

    /// Targeting 0: face the opponent. Targeting 1: face the moving direction (or hold facing).
    pub fn faces_opponent(&self) -> bool {
        self.mv % 2 == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombatantState {
    pub position: [f64; 2],
    pub hp: f64,
    pub sp: f64,
    /// Remaining cooldown per skill id (index 0 is no-op and always 0).
    pub cooldowns: Vec<u32>,
    /// Remaining ticks of an open prerequisite window, per skill id.
    pub combo_windows: Vec<u32>,
    pub status: Status,
    pub facing: [f64; 2],
}

impl CombatantState {
    pub(crate) fn mirrored(&self) -> Self {
        CombatantState {
            position: [-self.position[0], -self.position[1]],
            facing: [-self.facing[0], -self.facing[1]],
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ongoing,
    AgentWin,
    OpponentWin,
    Draw,
}

impl Outcome {
    pub fn winner(self) -> Option<Side> {
        match self {
            Outcome::AgentWin => Some(Side::Agent),
            Outcome::OpponentWin => Some(Side::Opponent),
            _ => None,
        }
    }

    pub fn swapped(self) -> Outcome {
        match self {
            Outcome::AgentWin => Outcome::OpponentWin,
            Outcome::OpponentWin => Outcome::AgentWin,
            o => o,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaState {
    pub tick: u32,
    pub seed: u64,
    pub agent: CombatantState,
    pub opponent: CombatantState,
    pub done: bool,
    pub outcome: Outcome,
}

impl ArenaState {
    pub fn player(&self, side: Side) -> &CombatantState {
        match side {
            Side::Agent => &self.agent,
            Side::Opponent => &self.opponent,
        }
    }

    pub fn player_mut(&mut self, side: Side) -> &mut CombatantState {
        match side {
            Side::Agent => &mut self.agent,
            Side::Opponent => &mut self.opponent,
        }
    }

    pub fn distance(&self) -> f64 {
        let dx = self.agent.position[0] - self.opponent.position[0];
        let dy = self.agent.position[1] - self.opponent.position[1];
        (dx * dx + dy * dy).sqrt()
    }

    /// Point reflection through the arena centre with the two players swapped.
    pub fn mirror(&self) -> ArenaState {
        ArenaState {
            tick: self.tick,
            seed: self.seed,
            agent: self.opponent.mirrored(),
            opponent: self.agent.mirrored(),
            done: self.done,
            outcome: self.outcome.swapped(),
        }
    }
}
