//! Passive no-op discarding with discount-preserving reward folding.

use serde::{Deserialize, Serialize};

use super::episode::Transition;
use crate::arena::{JointAction, SkillMask};

/// One tick as recorded by a simulator before filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTick {
    pub tick: u32,
    pub obs: Vec<f32>,
    pub mask: SkillMask,
    pub action: JointAction,
    pub behavior_skill: Vec<f64>,
    pub behavior_move: Option<Vec<f64>>,
    pub reward: f64,
    /// Ticks since the current move decision was made (0 at a fresh decision).
    pub move_phase: u32,
}

/// A no-op taken because nothing else was available.
pub fn is_passive_noop(tick: &RawTick) -> bool {
    tick.mask.is_noop_only()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredEpisode {
    pub transitions: Vec<Transition>,
    /// Discounted reward of passive ticks that precede the first retained tick.
    pub leading_return: f64,
}

/// Every tick of the episode was passive; such episodes carry no decisions and are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyEpisode;

/// Convert raw ticks to transitions, optionally dropping passive no-op ticks.
///
/// The reward of each dropped tick is folded into the closest preceding retained transition,
/// discounted by its distance, and that transition's `gap_discount` becomes `gamma^d`
/// for the distance `d` to the next retained tick, so discounted returns are unchanged.
pub fn filter_episode(raw: &[RawTick], gamma: f64, skip_passive: bool) -> Result<FilteredEpisode, EmptyEpisode> {
    let keep: Vec<usize> = (0..raw.len())
        .filter(|&i| !(skip_passive && is_passive_noop(&raw[i])))
        .collect();
    let Some(&first) = keep.first() else {
        return Err(EmptyEpisode);
    };

    let mut leading_return = 0.0;
    let mut discount = 1.0;
    for tick in &raw[..first] {
        leading_return += discount * tick.reward;
        discount *= gamma;
    }

    let mut transitions = Vec::with_capacity(keep.len());
    for (k, &i) in keep.iter().enumerate() {
        let end = keep.get(k + 1).copied().unwrap_or(raw.len());
        let mut reward = 0.0;
        let mut d = 1.0;
        for tick in &raw[i..end] {
            reward += d * tick.reward;
            d *= gamma;
        }
        let src = &raw[i];
        transitions.push(Transition {
            tick: src.tick,
            obs: src.obs.clone(),
            mask: src.mask,
            action: src.action,
            behavior_skill: src.behavior_skill.clone(),
            behavior_move: src.behavior_move.clone(),
            reward,
            gap_discount: gamma.powi((end - i) as i32),
            terminal: k + 1 == keep.len(),
        });
    }
    Ok(FilteredEpisode { transitions, leading_return })
}

/// Plain discounted return of a raw episode.
pub fn raw_return(raw: &[RawTick], gamma: f64) -> f64 {
    raw.iter().map(|t| gamma.powi(t.tick as i32) * t.reward).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::MOVE_ACTIONS;
    use proptest::prelude::*;

    const GAMMA: f64 = 0.995;

    fn tick(i: u32, passive: bool, reward: f64) -> RawTick {
        let mask = if passive {
            SkillMask::only_noop(4)
        } else {
            SkillMask::from_bools(&[true, true, true, true])
        };
        RawTick {
            tick: i,
            obs: vec![i as f32],
            mask,
            action: JointAction::new(if passive { 0 } else { 1 }, 16),
            behavior_skill: vec![0.25; 4],
            behavior_move: Some(vec![1.0 / MOVE_ACTIONS as f64; MOVE_ACTIONS]),
            reward,
            move_phase: 0,
        }
    }

    #[test]
    fn passive_classification() {
        assert!(is_passive_noop(&tick(0, true, 0.0)));
        let mut active_noop = tick(0, false, 0.0);
        active_noop.action.skill = 0;
        assert!(!is_passive_noop(&active_noop));
        assert!(!is_passive_noop(&tick(0, false, 0.0)));
    }

    #[test]
    fn identity_without_passive_ticks() {
        let raw: Vec<_> = (0..4).map(|i| tick(i, false, i as f64)).collect();
        let f = filter_episode(&raw, GAMMA, true).unwrap();
        assert_eq!(f.transitions.len(), 4);
        for (t, r) in f.transitions.iter().zip(&raw) {
            assert_eq!(t.reward, r.reward);
            assert_eq!(t.gap_discount, GAMMA);
            assert_eq!(t.obs, r.obs);
        }
        assert!(f.transitions[3].terminal);
        assert_eq!(f.leading_return, 0.0);
    }

    #[test]
    fn folds_a_skipped_tick() {
        let raw = vec![tick(0, false, 1.0), tick(1, true, 0.5), tick(2, false, 2.0)];
        let f = filter_episode(&raw, GAMMA, true).unwrap();
        assert_eq!(f.transitions.len(), 2);
        assert_eq!(f.transitions[0].reward, 1.0 + GAMMA * 0.5);
        assert_eq!(f.transitions[0].gap_discount, GAMMA * GAMMA);
        assert_eq!(f.transitions[1].tick, 2);
        assert!(f.transitions[1].terminal && !f.transitions[0].terminal);
    }

    #[test]
    fn skip_disabled_keeps_everything() {
        let raw = vec![tick(0, false, 1.0), tick(1, true, 0.5), tick(2, true, 2.0)];
        let f = filter_episode(&raw, GAMMA, false).unwrap();
        assert_eq!(f.transitions.len(), 3);
    }

    #[test]
    fn all_passive_is_empty() {
        let raw = vec![tick(0, true, 1.0), tick(1, true, 0.5)];
        assert_eq!(filter_episode(&raw, GAMMA, true), Err(EmptyEpisode));
    }

    #[test]
    fn trailing_passive_ticks_fold_into_terminal() {
        let raw = vec![tick(0, false, 0.0), tick(1, true, 0.0), tick(2, true, -10.0)];
        let f = filter_episode(&raw, GAMMA, true).unwrap();
        assert_eq!(f.transitions.len(), 1);
        assert!(f.transitions[0].terminal);
        assert!((f.transitions[0].reward - GAMMA * GAMMA * -10.0).abs() < 1e-12);
    }

    fn episode_strategy() -> impl Strategy<Value = Vec<RawTick>> {
        proptest::collection::vec((any::<bool>(), -2.0f64..2.0), 1..60).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (p, r))| tick(i as u32, p, r))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn removes_exactly_passive_ticks_and_preserves_return(raw in episode_strategy()) {
            match filter_episode(&raw, GAMMA, true) {
                Ok(f) => {
                    let kept: Vec<u32> = f.transitions.iter().map(|t| t.tick).collect();
                    let expected: Vec<u32> = raw.iter().filter(|t| !is_passive_noop(t)).map(|t| t.tick).collect();
                    prop_assert_eq!(kept, expected);
                    let folded = f.leading_return
                        + f.transitions.iter().map(|t| GAMMA.powi(t.tick as i32) * t.reward).sum::<f64>();
                    prop_assert!((folded - raw_return(&raw, GAMMA)).abs() < 1e-9);
                }
                Err(EmptyEpisode) => prop_assert!(raw.iter().all(is_passive_noop)),
            }
        }
    }
}
