use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::gradient::{episode_gradient, AcerConfig, GradStats};
use super::replay::{ReplayBuffer, DEFAULT_REPLAY_CAPACITY};
use crate::error::AcerError;
use crate::pipeline::EpisodeLog;
use crate::policy::{Head, NetworkParams};

pub const DEFAULT_BATCH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub acer: AcerConfig,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Update both heads every step instead of alternating skill and move steps.
    pub joint_heads: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            acer: AcerConfig::default(),
            adam: AdamConfig::default(),
            batch_size: DEFAULT_BATCH,
            replay_capacity: DEFAULT_REPLAY_CAPACITY,
            joint_heads: false,
        }
    }
}

/// One line of the learner metrics log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub step: u64,
    pub head: Head,
    pub samples: usize,
    pub policy_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub ratio_mean: f64,
    pub ratio_max: f64,
    pub truncated_frac: f64,
    pub grad_norm: f64,
}

/// The head trained at learner step `step`: skills on even steps, moves on odd steps.
pub fn head_for_step(step: u64) -> Head {
    if step % 2 == 0 {
        Head::Skill
    } else {
        Head::Move
    }
}

/// Mean ACER gradient over a batch for the given heads, summed over heads.
pub fn batch_gradient(
    params: &NetworkParams<f32>,
    batch: &[Arc<EpisodeLog>],
    heads: &[Head],
    cfg: &AcerConfig,
) -> Result<(NetworkParams<f32>, GradStats), AcerError> {
    if batch.is_empty() {
        return Err(AcerError::EmptyBatch);
    }
    let jobs: Vec<(usize, Head)> = (0..batch.len()).flat_map(|i| heads.iter().map(move |&h| (i, h))).collect();
    let parts: Vec<(NetworkParams<f32>, GradStats)> = jobs
        .par_iter()
        .map(|&(i, h)| {
            let (g, s) = episode_gradient(params, &batch[i], h, cfg)?;
            if !g.is_finite() {
                return Err(AcerError::NonFinite { episode: i, tick: 0 });
            }
            Ok((g, s))
        })
        .collect::<Result<_, AcerError>>()?;
    let mut grad = params.zeros_like();
    let mut stats = GradStats::default();
    for (g, s) in &parts {
        grad.add_assign(g);
        stats.merge(s);
    }
    if stats.samples > 0 {
        grad.scale(1.0 / stats.samples as f32);
    }
    Ok((grad, stats))
}

#[derive(Debug, Clone)]
pub struct Learner {
    pub params: NetworkParams<f32>,
    pub config: LearnerConfig,
    adam: Adam,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
    step: u64,
}

impl Learner {
    pub fn new(params: NetworkParams<f32>, config: LearnerConfig, seed: u64) -> Self {
        let adam = Adam::new(config.adam, params.len());
        Learner {
            params,
            config,
            adam,
            replay: ReplayBuffer::new(config.replay_capacity),
            rng: ChaCha8Rng::seed_from_u64(seed),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Resume counting from a restored step number.
    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.adam.config.lr = lr;
        self.config.adam.lr = lr;
    }

    pub fn ingest(&mut self, episode: EpisodeLog) {
        self.replay.push(Arc::new(episode));
    }

    /// Sample a batch from replay and take one optimizer step.
    pub fn update(&mut self) -> Result<UpdateStats, AcerError> {
        let batch = self.replay.sample(self.config.batch_size, &mut self.rng);
        self.update_on(&batch)
    }

    /// One optimizer step on an explicit batch.
    pub fn update_on(&mut self, batch: &[Arc<EpisodeLog>]) -> Result<UpdateStats, AcerError> {
        let head = head_for_step(self.step);
        let heads: &[Head] = if self.config.joint_heads { &[Head::Skill, Head::Move] } else { std::slice::from_ref(&head) };
        let (mut grad, stats) = batch_gradient(&self.params, batch, heads, &self.config.acer)?;
        let grad_norm = self.adam.update(&mut self.params, &mut grad);
        let out = UpdateStats {
            step: self.step,
            head,
            samples: stats.samples,
            policy_loss: stats.mean(stats.policy_loss),
            critic_loss: stats.mean(stats.critic_loss),
            entropy: stats.mean(stats.entropy),
            ratio_mean: stats.mean(stats.ratio_sum),
            ratio_max: stats.ratio_max,
            truncated_frac: stats.mean(stats.truncated as f64),
            grad_norm,
        };
        self.step += 1;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heads_alternate() {
        assert_eq!(head_for_step(0), Head::Skill);
        assert_eq!(head_for_step(1), Head::Move);
        assert_eq!(head_for_step(42), Head::Skill);
    }
}
