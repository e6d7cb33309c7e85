//! Off-policy actor-critic learner with Retrace targets and truncated importance weights.

mod adam;
mod gradient;
mod learner;
mod replay;
mod retrace;

pub use adam::{clip_global_norm, Adam, AdamConfig};
pub use gradient::{episode_gradient, head_signals, policy_weights, AcerConfig, FrozenSurrogate, GradStats};
pub use learner::{batch_gradient, head_for_step, Learner, LearnerConfig, UpdateStats, DEFAULT_BATCH};
pub use replay::{ReplayBuffer, DEFAULT_REPLAY_CAPACITY};
pub use retrace::{importance_ratio, retrace_from_outputs, retrace_targets, DEFAULT_TRUNCATION};
