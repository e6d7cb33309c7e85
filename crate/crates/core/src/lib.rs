//! Two-player real-time arena with a recurrent off-policy actor-critic learner,
//! style-shaped rewards and a shared-pool self-play curriculum.

pub mod acer;
pub mod arena;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod policy;
pub mod selfplay;
