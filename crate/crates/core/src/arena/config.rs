//! Arena constants and the skill roster, loaded from a versioned TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Roster schema version understood by this build.
pub const ROSTER_VERSION: u32 = 1;

const DEFAULT_ROSTER: &str = include_str!("../../assets/roster.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillFunction {
    Damage,
    CrowdControl,
    Resistance,
    Escape,
    Dash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CcKind {
    Stun,
    Knockdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DashKind {
    TowardOpponent,
    MoveDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prerequisite {
    pub skill: usize,
    /// Ticks after the prerequisite lands during which the skill is usable.
    pub window: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillSpec {
    pub id: usize,
    #[serde(default)]
    pub name: String,
    pub function: SkillFunction,
    #[serde(default)]
    pub cooldown: u32,
    #[serde(default)]
    pub sp_cost: f64,
    #[serde(default)]
    pub damage: f64,
    #[serde(default)]
    pub range: f64,
    #[serde(default)]
    pub cc: Option<CcKind>,
    #[serde(default)]
    pub cc_duration: u32,
    #[serde(default)]
    pub resist_duration: u32,
    #[serde(default)]
    pub displacement: f64,
    #[serde(default)]
    pub dash: Option<DashKind>,
    #[serde(default)]
    pub prerequisite: Option<Prerequisite>,
}

impl SkillSpec {
    pub fn noop() -> Self {
        SkillSpec {
            id: 0,
            name: "no-op".to_string(),
            function: SkillFunction::Damage,
            cooldown: 0,
            sp_cost: 0.0,
            damage: 0.0,
            range: 0.0,
            cc: None,
            cc_duration: 0,
            resist_duration: 0,
            displacement: 0.0,
            dash: None,
            prerequisite: None,
        }
    }

    /// Whether using the skill requires the target to be in range and in the frontal cone.
    pub fn is_targeted(&self) -> bool {
        self.id != 0
            && matches!(
                self.function,
                SkillFunction::Damage | SkillFunction::CrowdControl
            )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaConfig {
    pub radius: f64,
    pub move_speed: f64,
    pub spawn_distance: f64,
    pub sp_regen: f64,
    pub max_ticks: u32,
    pub max_hp: f64,
    pub max_sp: f64,
    pub hit_cone_degrees: f64,
    pub tick_seconds: f64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig {
            radius: 8.0,
            move_speed: 0.3,
            spawn_distance: 6.0,
            sp_regen: 0.05,
            max_ticks: 1800,
            max_hp: 10.0,
            max_sp: 10.0,
            hit_cone_degrees: 90.0,
            tick_seconds: 0.1,
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct RosterFile {
    version: u32,
    arena: ArenaConfig,
    skills: Vec<SkillSpec>,
}

/// Static game description: arena constants plus the skill list, index 0 being no-op.
#[derive(Debug, Clone, PartialEq)]
pub struct Roster {
    pub arena: ArenaConfig,
    skills: Vec<SkillSpec>,
}

impl Default for Roster {
    fn default() -> Self {
        Roster::from_toml_str(DEFAULT_ROSTER).expect("bundled roster is valid")
    }
}

impl Roster {
    pub fn new(arena: ArenaConfig, skills: Vec<SkillSpec>) -> Result<Self, ConfigError> {
        let mut all = Vec::with_capacity(skills.len() + 1);
        all.push(SkillSpec::noop());
        all.extend(skills);
        let roster = Roster { arena, skills: all };
        roster.validate()?;
        Ok(roster)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let file: RosterFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if file.version != ROSTER_VERSION {
            return Err(ConfigError::Version {
                found: file.version,
                expected: ROSTER_VERSION,
            });
        }
        Roster::new(file.arena, file.skills)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Roster::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = RosterFile {
            version: ROSTER_VERSION,
            arena: self.arena.clone(),
            skills: self.skills[1..].to_vec(),
        };
        toml::to_string(&file).expect("roster serializes")
    }

    /// Number of entries including no-op.
    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn skill(&self, id: usize) -> &SkillSpec {
        &self.skills[id]
    }

    pub fn skills(&self) -> &[SkillSpec] {
        &self.skills
    }

    /// Skills that unlock `id` when they land.
    pub(crate) fn unlocked_by(&self, id: usize) -> impl Iterator<Item = &SkillSpec> {
        self.skills
            .iter()
            .filter(move |s| s.prerequisite.is_some_and(|p| p.skill == id))
    }

    pub fn longest_cc(&self) -> u32 {
        self.skills
            .iter()
            .map(|s| s.cc_duration.max(s.resist_duration))
            .max()
            .unwrap_or(1)
            .max(1)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let a = &self.arena;
        let positive = [
            ("radius", a.radius),
            ("move_speed", a.move_speed),
            ("max_hp", a.max_hp),
            ("max_sp", a.max_sp),
            ("tick_seconds", a.tick_seconds),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("arena.{name} must be positive")));
            }
        }
        if a.max_ticks == 0 {
            return Err(ConfigError::Invalid("arena.max_ticks must be positive".into()));
        }
        if a.spawn_distance < 0.0 || a.spawn_distance / 2.0 > a.radius {
            return Err(ConfigError::Invalid("spawn_distance must fit in the arena".into()));
        }
        if self.skills.len() > 32 {
            return Err(ConfigError::Invalid("at most 31 skills are supported".into()));
        }
        for (i, s) in self.skills.iter().enumerate() {
            if s.id != i {
                return Err(ConfigError::Invalid(format!(
                    "skill ids must be 1..=n in order; found {} at position {i}",
                    s.id
                )));
            }
            if !(0.0..=a.max_sp).contains(&s.sp_cost) {
                return Err(ConfigError::Invalid(format!("skill {i}: sp_cost out of range")));
            }
            if !(0.0..=a.max_hp).contains(&s.damage) {
                return Err(ConfigError::Invalid(format!("skill {i}: damage out of range")));
            }
            if s.range < 0.0 || s.displacement < 0.0 {
                return Err(ConfigError::Invalid(format!("skill {i}: negative range")));
            }
            if s.function == SkillFunction::CrowdControl && (s.cc.is_none() || s.cc_duration == 0) {
                return Err(ConfigError::Invalid(format!("skill {i}: crowd control needs cc and cc_duration")));
            }
            if s.function == SkillFunction::Resistance && s.resist_duration == 0 {
                return Err(ConfigError::Invalid(format!("skill {i}: resistance needs resist_duration")));
            }
            if let Some(p) = s.prerequisite {
                if p.window == 0 {
                    return Err(ConfigError::Invalid(format!("skill {i}: prerequisite window must be > 0")));
                }
                if p.skill == 0 || p.skill >= self.skills.len() || p.skill == i {
                    return Err(ConfigError::Invalid(format!("skill {i}: bad prerequisite skill")));
                }
                if !self.skills[p.skill].is_targeted() {
                    return Err(ConfigError::Invalid(format!(
                        "skill {i}: prerequisite must be a skill that can land"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_roster_matches_design() {
        let r = Roster::default();
        assert_eq!(r.len(), 13);
        let count = |f| r.skills()[1..].iter().filter(|s| s.function == f).count();
        assert_eq!(count(SkillFunction::Damage), 4);
        assert_eq!(count(SkillFunction::CrowdControl), 3);
        assert_eq!(count(SkillFunction::Resistance), 2);
        assert_eq!(count(SkillFunction::Escape), 1);
        assert_eq!(count(SkillFunction::Dash), 2);
        let noop = r.skill(0);
        assert_eq!((noop.cooldown, noop.sp_cost, noop.damage), (0, 0.0, 0.0));
        assert!(r.skills().iter().any(|s| s.prerequisite.is_some()));
    }

    #[test]
    fn roster_round_trips_through_toml() {
        let r = Roster::default();
        let again = Roster::from_toml_str(&r.to_toml_string()).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn rejects_wrong_version_and_bad_window() {
        let text = DEFAULT_ROSTER.replace("version = 1", "version = 7");
        assert!(matches!(Roster::from_toml_str(&text), Err(ConfigError::Version { found: 7, .. })));
        let text = DEFAULT_ROSTER.replace("window = 15", "window = 0");
        assert!(matches!(Roster::from_toml_str(&text), Err(ConfigError::Invalid(_))));
    }
}
