//! JSON frames exchanged with a duel client over a websocket.
//!
//! Every frame carries `"v"`, the protocol version. Move indices are in the sender's own
//! frame of reference: directions 0..8 counter-clockwise from the player's forward axis,
//! 8 for no movement, plus 9 to turn targeting off.

use duelist_core::arena::{ArenaEvent, CombatantState, JointAction, Outcome};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientInput {
    pub v: u32,
    pub match_id: String,
    pub tick: u32,
    pub skill: usize,
    #[serde(rename = "move")]
    pub mv: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame {
    Hello {
        v: u32,
        match_id: String,
        seed: u64,
        tick_hz: f64,
        max_ticks: u32,
        skills: Vec<String>,
        moves: usize,
    },
    State(StateFrame),
    Warning {
        v: u32,
        tick: u32,
        message: String,
    },
    Error {
        v: u32,
        message: String,
    },
    End {
        v: u32,
        match_id: String,
        outcome: Outcome,
        ticks: u32,
        record: MatchRecord,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub v: u32,
    pub match_id: String,
    pub tick: u32,
    pub human: CombatantState,
    pub agent: CombatantState,
    /// Skills the human may use on the next tick.
    pub mask: Vec<bool>,
    /// Remaining cooldown ticks of the human's skills.
    pub cooldowns: Vec<u32>,
    /// What happened while resolving the previous tick.
    pub events: Vec<ArenaEvent>,
    pub outcome: Outcome,
}

/// Everything needed to re-run a live match: the arena is deterministic, so the seed and
/// the applied actions determine the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub match_id: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub ticks: u32,
    /// `[agent, human]` actions as applied, one pair per tick.
    pub actions: Vec<[JointAction; 2]>,
    pub aborted: bool,
    /// Human inputs replaced by a no-op because the skill was unavailable.
    pub rejected_inputs: u32,
}

impl ServerFrame {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frames serialize")
    }
}

/// Parse a client message, checking the protocol version.
pub fn parse_input(text: &str) -> Result<ClientInput, String> {
    let input: ClientInput = serde_json::from_str(text).map_err(|e| format!("malformed input: {e}"))?;
    if input.v != PROTOCOL_VERSION {
        return Err(format!("unsupported protocol version {} (expected {PROTOCOL_VERSION})", input.v));
    }
    Ok(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_uses_move_key() {
        let i = parse_input(r#"{"v":1,"match_id":"m","tick":3,"skill":2,"move":17}"#).unwrap();
        assert_eq!((i.tick, i.skill, i.mv), (3, 2, 17));
        assert!(parse_input(r#"{"v":2,"match_id":"m","tick":3,"skill":2,"move":1}"#).is_err());
        assert!(parse_input("{}").is_err());
    }

    #[test]
    fn frames_are_tagged_and_versioned() {
        let f = ServerFrame::Error { v: PROTOCOL_VERSION, message: "x".into() };
        let j: serde_json::Value = serde_json::from_str(&f.to_json()).unwrap();
        assert_eq!(j["type"], "error");
        assert_eq!(j["v"], 1);
    }
}
