//! Move-decision maintenance: a move chosen at a decision tick is repeated for `n` ticks.

use crate::arena::JointAction;

/// Window lengths swept in the maintenance ablation.
pub const MAINTENANCE_SWEEP: [u32; 4] = [1, 3, 5, 10];
pub const DEFAULT_MAINTENANCE: u32 = 10;

/// Per-agent maintenance state, reset at episode start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoveMaintainer {
    window: u32,
    /// Ticks since the current move was decided; `None` before the first decision.
    since: Option<u32>,
    current: usize,
}

/// What the maintainer produced for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveTick {
    pub mv: usize,
    /// Whether this tick made a fresh move decision.
    pub decided: bool,
    /// Ticks since the move in effect was decided.
    pub phase: u32,
}

impl MoveMaintainer {
    pub fn new(window: u32) -> Self {
        assert!(window >= 1, "maintenance window must be at least one tick");
        MoveMaintainer { window, since: None, current: JointAction::IDLE.mv }
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn reset(&mut self) {
        self.since = None;
        self.current = JointAction::IDLE.mv;
    }

    /// True when the next tick is due for a fresh move decision.
    pub fn wants_decision(&self) -> bool {
        self.since.is_none_or(|s| s >= self.window)
    }

    /// Advance one tick. `decide` is called only when a decision is due and `can_decide`
    /// holds; otherwise the current move is held and the decision stays pending.
    pub fn step(&mut self, can_decide: bool, decide: impl FnOnce() -> usize) -> MoveTick {
        if self.wants_decision() && can_decide {
            self.current = decide();
            self.since = Some(1);
            return MoveTick { mv: self.current, decided: true, phase: 0 };
        }
        let phase = self.since.unwrap_or(0);
        if let Some(s) = self.since.as_mut() {
            *s = s.saturating_add(1);
        }
        MoveTick { mv: self.current, decided: false, phase }
    }
}

/// Apply maintenance to a stream of candidate decisions over an episode of `len` ticks.
///
/// `decisions[t]` is the move the policy would pick if asked at tick `t`.
pub fn maintain_move(decisions: &[usize], window: u32) -> Vec<MoveTick> {
    let mut m = MoveMaintainer::new(window);
    decisions
        .iter()
        .map(|&d| m.step(true, || d))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn window_of_ten_repeats_first_choice() {
        let decisions: Vec<usize> = (0..25).map(|t| t % 18).collect();
        let out = maintain_move(&decisions, 10);
        for t in 0..10 {
            assert_eq!(out[t].mv, 0);
            assert_eq!(out[t].decided, t == 0);
            assert_eq!(out[t].phase, t as u32);
        }
        assert_eq!(out[10].mv, 10);
        assert!(out[10].decided);
        assert_eq!(out[20].mv, 20 % 18);
    }

    #[test]
    fn window_of_one_is_identity() {
        let decisions = vec![3, 5, 5, 17, 0];
        let out = maintain_move(&decisions, 1);
        assert_eq!(out.iter().map(|m| m.mv).collect::<Vec<_>>(), decisions);
        assert!(out.iter().all(|m| m.decided));
    }

    #[test]
    fn episode_end_truncates_window() {
        let out = maintain_move(&[4; 13], 10);
        assert_eq!(out.len(), 13);
        assert_eq!(out.iter().filter(|m| m.decided).count(), 2);
    }

    #[test]
    fn pending_decision_waits_for_a_decidable_tick() {
        let mut m = MoveMaintainer::new(3);
        assert!(m.step(true, || 7).decided);
        m.step(true, || unreachable!());
        m.step(true, || unreachable!());
        // Due now but the tick is skipped: hold the old move.
        let held = m.step(false, || unreachable!());
        assert_eq!((held.mv, held.decided), (7, false));
        let fresh = m.step(true, || 2);
        assert_eq!((fresh.mv, fresh.decided, fresh.phase), (2, true, 0));
    }

    proptest! {
        #[test]
        fn move_constant_within_windows(decisions in proptest::collection::vec(0usize..18, 1..80), n in 1u32..12) {
            let out = maintain_move(&decisions, n);
            let mut current = None;
            for (t, m) in out.iter().enumerate() {
                if m.decided {
                    prop_assert_eq!(t as u32 % n, 0);
                    prop_assert_eq!(m.mv, decisions[t]);
                    current = Some(m.mv);
                } else {
                    prop_assert_eq!(Some(m.mv), current);
                }
            }
        }
    }
}
