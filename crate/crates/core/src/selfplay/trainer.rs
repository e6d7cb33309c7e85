use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acer::{Learner, LearnerConfig, UpdateStats};
use crate::arena::{Arena, Outcome, Style, StyleConfig, GAMMA};
use crate::error::EvalError;
use crate::eval::{entropy, play_episode, EpisodeOptions, NetPolicy, Policy};
use crate::pipeline::{filter_episode, EpisodeLog, OpponentRef, DEFAULT_MAINTENANCE};
use crate::policy::{NetShape, NetworkParams, DEFAULT_HIDDEN};

/// How many times a crashed worker is respawned before its slot is left empty for the round.
const RESPAWNS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    /// Simulator workers, each playing one episode per round.
    pub workers: usize,
    pub hidden: usize,
    /// Move maintenance window in ticks.
    pub maintenance: u32,
    pub skip_passive: bool,
    /// Learner updates per collected episode.
    pub updates_per_episode: f64,
    /// Episodes in replay before the first update.
    pub warmup_episodes: usize,
    pub learner: LearnerConfig,
    /// Crash the worker playing this episode number (counted from zero) on its first attempt.
    #[serde(skip)]
    pub fault_episode: Option<u64>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            workers: 8,
            hidden: DEFAULT_HIDDEN,
            maintenance: DEFAULT_MAINTENANCE,
            skip_passive: true,
            updates_per_episode: 1.0,
            warmup_episodes: 16,
            learner: LearnerConfig::default(),
            fault_episode: None,
        }
    }
}

/// Builds the opponent of one worker for one round.
pub type OpponentFactory<'a> =
    dyn Fn(usize, &mut ChaCha8Rng) -> Result<(Box<dyn Policy>, OpponentRef), EvalError> + Sync + 'a;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u64,
    pub episodes: u64,
    pub ticks: u64,
    pub wins: u64,
    pub losses: u64,
    pub draws: u64,
    pub crashes: u64,
    /// Episodes that produced training data.
    pub logged: u64,
    /// Mean entropy of the move head at fresh move decisions.
    pub move_entropy: f64,
    pub skill_entropy: f64,
    pub updates: Vec<UpdateStats>,
    /// `(learner step, ticks, parameters)` captured where a snapshot fell due.
    #[serde(skip)]
    pub due_snapshots: Vec<(u64, u64, NetworkParams<f32>)>,
}

fn mix(a: u64, b: u64) -> u64 {
    crate::eval::match_seed(a, b)
}

/// One style's learner together with the bookkeeping of its simulators.
#[derive(Debug, Clone)]
pub struct StyleTrainer {
    pub style: Style,
    pub reward: StyleConfig,
    pub config: TrainerConfig,
    pub learner: Learner,
    pub ticks: u64,
    pub episodes: u64,
    pub rounds: u64,
    seed: u64,
    update_carry: f64,
}

impl StyleTrainer {
    pub fn new(arena: &Arena, style: Style, reward: StyleConfig, config: TrainerConfig, seed: u64) -> Self {
        let shape = NetShape::for_arena(arena, config.hidden);
        let params = NetworkParams::init(shape, mix(seed, 1));
        Self::with_params(style, reward, config, params, seed)
    }

    pub fn with_params(style: Style, reward: StyleConfig, config: TrainerConfig, params: NetworkParams<f32>, seed: u64) -> Self {
        StyleTrainer {
            style,
            reward,
            config,
            learner: Learner::new(params, config.learner, mix(seed, 2)),
            ticks: 0,
            episodes: 0,
            rounds: 0,
            seed,
            update_carry: 0.0,
        }
    }

    pub fn params(&self) -> &NetworkParams<f32> {
        &self.learner.params
    }

    /// A policy playing with the current parameters, configured like the training agent.
    pub fn current_policy(&self) -> NetPolicy {
        NetPolicy::new(Arc::new(self.learner.params.clone()))
            .with_maintenance(self.config.maintenance)
            .with_skip_passive(self.config.skip_passive)
            .with_label(self.style.name())
    }

    fn play_worker(
        &self,
        arena: &Arena,
        agent_params: &Arc<NetworkParams<f32>>,
        opponents: &OpponentFactory<'_>,
        w: usize,
    ) -> (Option<EpisodeLog>, Option<Outcome>, u64, u64) {
        let episode_no = self.episodes + w as u64;
        let mut crashes = 0;
        for attempt in 0..=RESPAWNS {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(self.seed, self.rounds), (w as u64) << 8 | u64::from(attempt)));
            let inject = attempt == 0 && self.config.fault_episode == Some(episode_no);
            let run = catch_unwind(AssertUnwindSafe(|| -> Result<_, EvalError> {
                if inject {
                    panic!("injected worker fault in episode {episode_no}");
                }
                let (mut opponent, oref) = opponents(w, &mut rng)?;
                let mut agent = NetPolicy::new(agent_params.clone())
                    .with_maintenance(self.config.maintenance)
                    .with_skip_passive(self.config.skip_passive);
                let seed = rng.next_u64();
                let opts = EpisodeOptions { record_reward: Some(&self.reward), record_trace: false };
                let (result, raw) = play_episode(arena, &mut agent, &mut opponent, seed, opts)?;
                Ok((result, raw, oref))
            }));
            match run {
                Ok(Ok((result, raw, oref))) => {
                    let ticks = u64::from(result.ticks);
                    let log = filter_episode(&raw, GAMMA, self.config.skip_passive).ok().map(|f| EpisodeLog {
                        style: self.style,
                        agent_version: self.learner.step(),
                        opponent: oref,
                        outcome: result.outcome,
                        ticks: result.ticks,
                        leading_return: f.leading_return,
                        transitions: f.transitions,
                    });
                    return (log, Some(result.outcome), ticks, crashes);
                }
                // A failing episode is discarded and the worker respawned.
                Ok(Err(_)) | Err(_) => crashes += 1,
            }
        }
        (None, None, 0, crashes)
    }

    /// Play one episode per worker against opponents from `opponents`, then learn from them.
    pub fn run_round(&mut self, arena: &Arena, opponents: &OpponentFactory<'_>, snapshot_every: u64) -> RoundReport {
        let agent_params = Arc::new(self.learner.params.clone());
        let played: Vec<_> = (0..self.config.workers)
            .into_par_iter()
            .map(|w| self.play_worker(arena, &agent_params, opponents, w))
            .collect();

        let mut report = RoundReport { round: self.rounds, ..RoundReport::default() };
        let (mut move_h, mut move_n, mut skill_h, mut skill_n) = (0.0, 0usize, 0.0, 0usize);
        for (log, outcome, ticks, crashes) in played {
            report.crashes += crashes;
            report.ticks += ticks;
            match outcome {
                Some(Outcome::AgentWin) => report.wins += 1,
                Some(Outcome::OpponentWin) => report.losses += 1,
                Some(_) => report.draws += 1,
                None => {}
            }
            if outcome.is_some() {
                report.episodes += 1;
            }
            if let Some(log) = log {
                for t in &log.transitions {
                    if !t.mask.is_noop_only() {
                        skill_h += entropy(&t.behavior_skill);
                        skill_n += 1;
                    }
                    if let Some(m) = &t.behavior_move {
                        move_h += entropy(m);
                        move_n += 1;
                    }
                }
                report.logged += 1;
                self.learner.ingest(log);
            }
        }
        report.move_entropy = if move_n > 0 { move_h / move_n as f64 } else { 0.0 };
        report.skill_entropy = if skill_n > 0 { skill_h / skill_n as f64 } else { 0.0 };
        self.ticks += report.ticks;
        self.episodes += self.config.workers as u64;
        self.rounds += 1;

        if self.learner.replay().len() >= self.config.warmup_episodes.max(1) {
            self.update_carry += report.episodes as f64 * self.config.updates_per_episode;
            while self.update_carry >= 1.0 {
                self.update_carry -= 1.0;
                match self.learner.update() {
                    Ok(stats) => report.updates.push(stats),
                    // A batch with a corrupt transition is skipped; the step counter does not advance.
                    Err(_) => continue,
                }
                let step = self.learner.step();
                if snapshot_every > 0 && step % snapshot_every == 0 {
                    report.due_snapshots.push((step, self.ticks, self.learner.params.clone()));
                }
            }
        }
        report
    }
}

/// Opponent factory that always builds the same kind of policy.
pub fn fixed_opponent<P, F>(make: F, reference: OpponentRef) -> impl Fn(usize, &mut ChaCha8Rng) -> Result<(Box<dyn Policy>, OpponentRef), EvalError> + Sync
where
    P: Policy + 'static,
    F: Fn() -> P + Sync,
{
    move |_, _| Ok((Box::new(make()) as Box<dyn Policy>, reference))
}
