use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;

use crate::pipeline::EpisodeLog;

pub const DEFAULT_REPLAY_CAPACITY: usize = 5000;

/// Fixed-capacity ring of episodes; the oldest is evicted on overflow.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<Arc<EpisodeLog>>,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { capacity, episodes: VecDeque::with_capacity(capacity.min(1024)), inserted: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Total number of episodes ever pushed.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, ep: Arc<EpisodeLog>) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(ep);
        self.inserted += 1;
    }

    pub fn newest(&self) -> Option<&Arc<EpisodeLog>> {
        self.episodes.back()
    }

    /// The `n` most recently pushed episodes, oldest first.
    pub fn newest_n(&self, n: usize) -> impl Iterator<Item = &EpisodeLog> {
        let skip = self.episodes.len().saturating_sub(n);
        self.episodes.iter().skip(skip).map(|e| e.as_ref())
    }

    /// Uniform sample of `n` episodes, without replacement when the buffer holds enough.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Arc<EpisodeLog>> {
        let len = self.episodes.len();
        if len == 0 || n == 0 {
            return Vec::new();
        }
        if n <= len {
            index::sample(rng, len, n).into_iter().map(|i| self.episodes[i].clone()).collect()
        } else {
            (0..n).map(|_| self.episodes[rng.random_range(0..len)].clone()).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{Outcome, Style};
    use crate::pipeline::OpponentRef;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ep(v: u64) -> Arc<EpisodeLog> {
        Arc::new(EpisodeLog {
            style: Style::Balanced,
            agent_version: v,
            opponent: OpponentRef::MirrorSelf,
            outcome: Outcome::Draw,
            ticks: 0,
            leading_return: 0.0,
            transitions: vec![],
        })
    }

    #[test]
    fn evicts_oldest() {
        let mut r = ReplayBuffer::new(3);
        for v in 0..5 {
            r.push(ep(v));
        }
        assert_eq!(r.len(), 3);
        assert_eq!(r.inserted(), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut versions: Vec<u64> = r.sample(3, &mut rng).iter().map(|e| e.agent_version).collect();
        versions.sort();
        assert_eq!(versions, vec![2, 3, 4]);
    }

    #[test]
    fn samples_with_replacement_when_short() {
        let mut r = ReplayBuffer::new(10);
        r.push(ep(7));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(r.sample(4, &mut rng).len(), 4);
    }
}
