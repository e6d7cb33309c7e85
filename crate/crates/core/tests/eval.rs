use std::sync::{Arc, Mutex};

use duelist_core::arena::{Arena, ArenaState, Outcome, Side};
use duelist_core::eval::*;
use duelist_core::policy::{NetShape, NetworkParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Wraps a policy and records the tick of every state it is shown.
struct Seen<P> {
    inner: P,
    ticks: Arc<Mutex<Vec<u32>>>,
}

impl<P: Policy> Policy for Seen<P> {
    fn reset(&mut self) {
        self.inner.reset()
    }

    fn act(
        &mut self,
        arena: &Arena,
        state: &ArenaState,
        side: Side,
        rng: &mut ChaCha8Rng,
    ) -> Result<Decision, duelist_core::error::NetError> {
        self.ticks.lock().unwrap().push(state.tick);
        self.inner.act(arena, state, side, rng)
    }

    fn name(&self) -> String {
        self.inner.name()
    }
}

#[test]
fn attacker_beats_idle_every_match() {
    let arena = Arena::default();
    let r = play_matches(&arena, || SingleAttackPolicy { skill: 1 }, || NoOpPolicy, 40, 5).unwrap();
    assert_eq!(r.wins_a, 40, "{r:?}");
    for m in &r.results {
        assert!(m.ticks <= arena.max_ticks());
        assert_eq!(m.final_hp[1], 0.0);
        assert!(m.damage_dealt[0] > 0.0 && m.damage_dealt[1] == 0.0);
    }
}

#[test]
fn matches_are_deterministic_for_a_seed() {
    let arena = Arena::default();
    let params = Arc::new(NetworkParams::init(NetShape::for_arena(&arena, 8), 2));
    let run = || play_matches(&arena, || NetPolicy::new(params.clone()), || ScriptedPolicy::default(), 12, 77).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn identical_policies_split_wins_evenly() {
    let arena = Arena::default();
    let params = Arc::new(NetworkParams::init(NetShape::for_arena(&arena, 8), 11));
    let r = play_matches(&arena, || SingleAttackPolicy { skill: 2 }, || SingleAttackPolicy { skill: 2 }, 200, 3).unwrap();
    assert!(r.wins_a.abs_diff(r.wins_b) <= 2 * r.matches / 10 || r.draws == r.matches, "{r:?}");

    let r = play_matches(&arena, || NetPolicy::new(params.clone()), || NetPolicy::new(params.clone()), 1000, 9).unwrap();
    let decisive = r.wins_a + r.wins_b;
    let p = binomial_two_sided(r.wins_a, decisive.max(1), 0.5);
    assert!(p > 0.01, "mirror match {} to {} (p = {p})", r.wins_a, r.wins_b);
}

#[test]
fn passive_ticks_are_not_counted_as_actions() {
    let arena = Arena::default();
    let (m, _) = play_episode(
        &arena,
        &mut SingleAttackPolicy { skill: 1 },
        &mut ScriptedPolicy::default(),
        4,
        EpisodeOptions { record_reward: None, record_trace: true },
    )
    .unwrap();
    let trace = m.trace.as_ref().unwrap();
    let mut state = arena.reset(4);
    let mut expected = [0u64; 2];
    for pair in trace {
        for side in [Side::Agent, Side::Opponent] {
            if !arena.available_skills(&state, side).is_noop_only() {
                expected[side.index()] += 1;
            }
        }
        state = arena.step(&state, pair[0], pair[1]).unwrap().state;
    }
    let counted = [m.skill_counts[0].iter().sum::<u64>(), m.skill_counts[1].iter().sum::<u64>()];
    assert_eq!(counted, expected);
    assert!(counted[0] < u64::from(m.ticks) || counted[1] < u64::from(m.ticks));
    assert_eq!(replay_trace(&arena, 4, trace).unwrap(), (m.outcome, m.ticks));
}

#[test]
fn reaction_delay_mean_and_order() {
    let arena = Arena::default();
    let mut stats = DelayStats::default();
    let mut seed = 0;
    while stats.applied < 100_000 {
        let seen = Arc::new(Mutex::new(Vec::new()));
        let mut agent = apply_reaction_delay(Seen { inner: ScriptedPolicy::default(), ticks: seen.clone() });
        agent.record_sources = true;
        let mut opponent = SingleAttackPolicy { skill: 1 };
        let (m, _) = play_episode(&arena, &mut agent, &mut opponent, seed, EpisodeOptions::default()).unwrap();

        let seen = seen.lock().unwrap();
        assert!(seen.windows(2).all(|w| w[0] < w[1]), "inner policy saw a reordered state");
        assert!(agent.sources.windows(2).all(|w| w[0] <= w[1]));
        for (tick, &src) in agent.sources.iter().enumerate().skip(3) {
            let d = tick as u32 - src;
            assert!((2..=3).contains(&d), "tick {tick} acted on {src}");
        }
        assert_eq!(agent.sources.len(), m.ticks as usize);
        stats.applied += agent.stats.applied;
        stats.delay_sum += agent.stats.delay_sum;
        seed += 1;
    }
    let mean = stats.mean_delay();
    assert!((mean - 2.3).abs() <= 0.023, "mean delay {mean}");
    let ms = mean * arena.roster().arena.tick_seconds * 1000.0;
    assert!((ms - 230.0).abs() <= 2.3, "{ms} ms");
}

#[test]
fn zero_delay_is_the_identity() {
    let arena = Arena::default();
    let params = Arc::new(NetworkParams::init(NetShape::for_arena(&arena, 8), 6));
    for seed in 0..4 {
        let opts = EpisodeOptions { record_reward: None, record_trace: true };
        let (plain, _) = play_episode(&arena, &mut NetPolicy::new(params.clone()), &mut ScriptedPolicy::default(), seed, opts).unwrap();
        let mut delayed = DelayedPolicy::new(NetPolicy::new(params.clone()), DelayDistribution::constant(0));
        let (wrapped, _) = play_episode(&arena, &mut delayed, &mut ScriptedPolicy::default(), seed, opts).unwrap();
        assert_eq!(plain.trace, wrapped.trace);
        assert_eq!(plain.outcome, wrapped.outcome);
        assert_eq!(delayed.stats.repeats, 0);
    }
}

#[test]
fn delayed_agent_never_uses_an_unavailable_skill() {
    let arena = Arena::default();
    for seed in 0..20 {
        let mut agent = apply_reaction_delay(ScriptedPolicy::default());
        let opts = EpisodeOptions { record_reward: None, record_trace: true };
        // `step` rejects unavailable skills, so finishing the match is the check.
        let (m, _) = play_episode(&arena, &mut agent, &mut SingleAttackPolicy { skill: 2 }, seed, opts).unwrap();
        assert_ne!(m.outcome, Outcome::Ongoing);
    }
}

#[test]
fn move_entropy_reference_values() {
    let uniform = vec![vec![1.0 / 18.0; 18]];
    assert!((move_policy_entropy(&uniform) - 18f64.ln()).abs() < 1e-12);
    let mut one_hot = vec![0.0; 18];
    one_hot[4] = 1.0;
    assert_eq!(move_policy_entropy(&[one_hot.clone()]), 0.0);
    let mut half = vec![0.0; 18];
    half[0] = 0.5;
    half[1] = 0.5;
    let mixed = move_policy_entropy(&[half, one_hot]);
    assert!((mixed - 0.5 * 2f64.ln()).abs() < 1e-12);
}

#[test]
fn delay_sampling_consumes_no_randomness_when_constant() {
    use rand::RngCore;
    let mut a = ChaCha8Rng::seed_from_u64(1);
    let mut b = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(DelayDistribution::constant(3).sample(&mut a), 3);
    assert_eq!(a.next_u64(), b.next_u64());
    assert!((DelayDistribution::reaction().mean() - 2.3).abs() < 1e-12);
}
