//! Episode log files.
//!
//! A file is the 8-byte magic `DUELLOG\0`, a little-endian `u16` version, then a sequence of
//! records, each a `u32` payload length followed by the payload. Payload layout (LE):
//!
//! ```text
//! u8  style (0 aggressive, 1 balanced, 2 defensive, 3 baseline)
//! u64 agent_version
//! u8  opponent kind (0 snapshot, 1 mirror-self, 2 scripted, 3 human)
//! u8  opponent style   u64 opponent snapshot id   (zero unless kind = 0)
//! u8  outcome (0 ongoing, 1 agent win, 2 opponent win, 3 draw)
//! u32 ticks            f64 leading_return
//! u32 transition count u16 observation length   u8 skill count   u8 move count
//! per transition:
//!   u32 tick  u32 mask bits  u8 skill  u8 move  f64 reward  f64 gap_discount  u8 terminal
//!   f32 x obs_len   f64 x skill count (behavior skill distribution)
//!   u8 has_move_decision   [f64 x move count]
//! ```

use std::io::{BufRead, Write};

use super::episode::{EpisodeLog, OpponentRef, SnapshotKey, Transition};
use crate::arena::{JointAction, Outcome, SkillMask, Style};
use crate::error::LogError;

pub const LOG_MAGIC: &[u8; 8] = b"DUELLOG\0";
pub const LOG_VERSION: u16 = 1;

fn style_code(s: Style) -> u8 {
    match s {
        Style::Aggressive => 0,
        Style::Balanced => 1,
        Style::Defensive => 2,
        Style::Baseline => 3,
    }
}

fn style_from(c: u8) -> Result<Style, LogError> {
    Ok(match c {
        0 => Style::Aggressive,
        1 => Style::Balanced,
        2 => Style::Defensive,
        3 => Style::Baseline,
        _ => return Err(LogError::Malformed(format!("bad style code {c}"))),
    })
}

fn outcome_code(o: Outcome) -> u8 {
    match o {
        Outcome::Ongoing => 0,
        Outcome::AgentWin => 1,
        Outcome::OpponentWin => 2,
        Outcome::Draw => 3,
    }
}

fn outcome_from(c: u8) -> Result<Outcome, LogError> {
    Ok(match c {
        0 => Outcome::Ongoing,
        1 => Outcome::AgentWin,
        2 => Outcome::OpponentWin,
        3 => Outcome::Draw,
        _ => return Err(LogError::Malformed(format!("bad outcome code {c}"))),
    })
}

pub fn encode_episode(ep: &EpisodeLog) -> Vec<u8> {
    let obs_len = ep.transitions.first().map_or(0, |t| t.obs.len());
    let skills = ep.transitions.first().map_or(0, |t| t.behavior_skill.len());
    let moves = ep
        .transitions
        .iter()
        .find_map(|t| t.behavior_move.as_ref().map(Vec::len))
        .unwrap_or(crate::arena::MOVE_ACTIONS);
    let mut b = Vec::new();
    b.push(style_code(ep.style));
    b.extend_from_slice(&ep.agent_version.to_le_bytes());
    let (kind, ostyle, oid) = match ep.opponent {
        OpponentRef::Snapshot(k) => (0u8, style_code(k.style), k.id),
        OpponentRef::MirrorSelf => (1, 0, 0),
        OpponentRef::Scripted => (2, 0, 0),
        OpponentRef::Human => (3, 0, 0),
    };
    b.push(kind);
    b.push(ostyle);
    b.extend_from_slice(&oid.to_le_bytes());
    b.push(outcome_code(ep.outcome));
    b.extend_from_slice(&ep.ticks.to_le_bytes());
    b.extend_from_slice(&ep.leading_return.to_le_bytes());
    b.extend_from_slice(&(ep.transitions.len() as u32).to_le_bytes());
    b.extend_from_slice(&(obs_len as u16).to_le_bytes());
    b.push(skills as u8);
    b.push(moves as u8);
    for t in &ep.transitions {
        b.extend_from_slice(&t.tick.to_le_bytes());
        b.extend_from_slice(&t.mask.bits().to_le_bytes());
        b.push(t.action.skill as u8);
        b.push(t.action.mv as u8);
        b.extend_from_slice(&t.reward.to_le_bytes());
        b.extend_from_slice(&t.gap_discount.to_le_bytes());
        b.push(u8::from(t.terminal));
        for v in &t.obs {
            b.extend_from_slice(&v.to_le_bytes());
        }
        for v in &t.behavior_skill {
            b.extend_from_slice(&v.to_le_bytes());
        }
        match &t.behavior_move {
            Some(m) => {
                b.push(1);
                for v in m {
                    b.extend_from_slice(&v.to_le_bytes());
                }
            }
            None => b.push(0),
        }
    }
    b
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LogError> {
        if self.0.len() < n {
            return Err(LogError::Malformed("record truncated".into()));
        }
        let (h, r) = self.0.split_at(n);
        self.0 = r;
        Ok(h)
    }
    fn u8(&mut self) -> Result<u8, LogError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, LogError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2")))
    }
    fn u32(&mut self) -> Result<u32, LogError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4")))
    }
    fn u64(&mut self) -> Result<u64, LogError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8")))
    }
    fn f32(&mut self) -> Result<f32, LogError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4")))
    }
    fn f64(&mut self) -> Result<f64, LogError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8")))
    }
}

pub fn decode_episode(payload: &[u8]) -> Result<EpisodeLog, LogError> {
    let mut c = Cursor(payload);
    let style = style_from(c.u8()?)?;
    let agent_version = c.u64()?;
    let kind = c.u8()?;
    let ostyle = c.u8()?;
    let oid = c.u64()?;
    let opponent = match kind {
        0 => OpponentRef::Snapshot(SnapshotKey { style: style_from(ostyle)?, id: oid }),
        1 => OpponentRef::MirrorSelf,
        2 => OpponentRef::Scripted,
        3 => OpponentRef::Human,
        k => return Err(LogError::Malformed(format!("bad opponent kind {k}"))),
    };
    let outcome = outcome_from(c.u8()?)?;
    let ticks = c.u32()?;
    let leading_return = c.f64()?;
    let n = c.u32()? as usize;
    let obs_len = c.u16()? as usize;
    let skills = c.u8()? as usize;
    let moves = c.u8()? as usize;
    let mut transitions = Vec::with_capacity(n);
    for _ in 0..n {
        let tick = c.u32()?;
        let mask = SkillMask::from_bits(c.u32()?, skills);
        let action = JointAction::new(c.u8()? as usize, c.u8()? as usize);
        let reward = c.f64()?;
        let gap_discount = c.f64()?;
        let terminal = c.u8()? != 0;
        let obs = (0..obs_len).map(|_| c.f32()).collect::<Result<_, _>>()?;
        let behavior_skill = (0..skills).map(|_| c.f64()).collect::<Result<_, _>>()?;
        let behavior_move = match c.u8()? {
            0 => None,
            1 => Some((0..moves).map(|_| c.f64()).collect::<Result<_, _>>()?),
            f => return Err(LogError::Malformed(format!("bad move flag {f}"))),
        };
        transitions.push(Transition {
            tick,
            obs,
            mask,
            action,
            behavior_skill,
            behavior_move,
            reward,
            gap_discount,
            terminal,
        });
    }
    if !c.0.is_empty() {
        return Err(LogError::Malformed(format!("{} trailing bytes in record", c.0.len())));
    }
    Ok(EpisodeLog { style, agent_version, opponent, outcome, ticks, leading_return, transitions })
}

/// Streams episode records into a log file.
pub struct EpisodeWriter<W: Write> {
    out: W,
}

impl<W: Write> EpisodeWriter<W> {
    pub fn new(mut out: W) -> Result<Self, LogError> {
        out.write_all(LOG_MAGIC)?;
        out.write_all(&LOG_VERSION.to_le_bytes())?;
        Ok(EpisodeWriter { out })
    }

    pub fn write(&mut self, ep: &EpisodeLog) -> Result<(), LogError> {
        let payload = encode_episode(ep);
        self.out.write_all(&(payload.len() as u32).to_le_bytes())?;
        self.out.write_all(&payload)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, LogError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads every record of a log.
pub fn read_episodes<R: BufRead>(mut input: R) -> Result<Vec<EpisodeLog>, LogError> {
    let mut header = [0u8; 10];
    input.read_exact(&mut header)?;
    if &header[..8] != LOG_MAGIC {
        return Err(LogError::Malformed("bad magic".into()));
    }
    let version = u16::from_le_bytes([header[8], header[9]]);
    if version != LOG_VERSION {
        return Err(LogError::Malformed(format!("unsupported version {version}")));
    }
    let mut out = Vec::new();
    loop {
        if input.fill_buf()?.is_empty() {
            break;
        }
        let mut len = [0u8; 4];
        input.read_exact(&mut len)?;
        let mut payload = vec![0u8; u32::from_le_bytes(len) as usize];
        input.read_exact(&mut payload)?;
        out.push(decode_episode(&payload)?);
    }
    Ok(out)
}

/// One JSON object per episode, one line each.
pub fn dump_text<W: Write>(episodes: &[EpisodeLog], mut out: W) -> Result<(), LogError> {
    for ep in episodes {
        let line = serde_json::to_string(ep).map_err(|e| LogError::Malformed(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn transition_strategy() -> impl Strategy<Value = Transition> {
        (
            any::<u32>(),
            any::<u32>(),
            0usize..5,
            0usize..18,
            -20.0f64..20.0,
            proptest::collection::vec(-1.0f32..1.0, 3),
            proptest::option::of(proptest::collection::vec(0.0f64..1.0, 18)),
            any::<bool>(),
        )
            .prop_map(|(tick, bits, skill, mv, reward, obs, mv_dist, terminal)| Transition {
                tick,
                obs,
                mask: SkillMask::from_bits(bits | 1, 5),
                action: JointAction::new(skill, mv),
                behavior_skill: vec![0.2; 5],
                behavior_move: mv_dist,
                reward,
                gap_discount: 0.995,
                terminal,
            })
    }

    proptest! {
        #[test]
        fn records_round_trip(ts in proptest::collection::vec(transition_strategy(), 0..6), lead in -3.0f64..3.0) {
            let ep = EpisodeLog {
                style: Style::Balanced,
                agent_version: 12,
                opponent: OpponentRef::Snapshot(SnapshotKey { style: Style::Defensive, id: 4 }),
                outcome: Outcome::OpponentWin,
                ticks: 99,
                leading_return: lead,
                transitions: ts,
            };
            let mut w = EpisodeWriter::new(Vec::new()).unwrap();
            w.write(&ep).unwrap();
            w.write(&ep).unwrap();
            let bytes = w.finish().unwrap();
            let back = read_episodes(&bytes[..]).unwrap();
            prop_assert_eq!(back.len(), 2);
            prop_assert_eq!(&back[0], &ep);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_episodes(&b"NOTALOG\0\x01\x00"[..]).is_err());
        let mut bytes = Vec::from(&LOG_MAGIC[..]);
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[9, 9, 9]);
        assert!(matches!(read_episodes(&bytes[..]), Err(LogError::Malformed(_))));
    }
}
