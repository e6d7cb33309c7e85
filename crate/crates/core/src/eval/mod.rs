//! Policies, match evaluation, reaction delay and the ablation harness.

mod ablation;
mod delay;
mod matches;
mod policy;
mod rollout;

pub use ablation::{
    cross_evaluation, entropy_curve, run_ablation, AblationConfig, Suite, game_lengths, load_artifact, median, spaced_snapshots, styles_vs_baseline, train_to_threshold,
    write_csv, write_jsonl, CurvePoint, EntropyConfig, EntropyPoint, EntropyRun, LengthRow, TableRow, ThresholdConfig, ThresholdRun,
};
pub use delay::{apply_reaction_delay, DelayDistribution, DelayStats, DelayedPolicy};
pub use matches::{
    binomial_two_sided, binomial_upper_tail, entropy, match_seed, move_policy_entropy, play_matches, wilson_interval,
    winner_label, MatchReport,
};
pub use policy::{Decision, DecisionRecord, NetPolicy, NoOpPolicy, Policy, ScriptedConfig, ScriptedPolicy, SingleAttackPolicy};
pub use rollout::{play_episode, replay_trace, EpisodeOptions, MatchResult};
