use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arena::Style;
use crate::error::PoolError;
use crate::pipeline::SnapshotKey;

pub const DEFAULT_RECENT_K: usize = 5;
pub const P_START: f64 = 0.8;
pub const P_END: f64 = 0.1;

/// Mass on the recent set after `progress` (clamped to `[0, 1]`) of training.
pub fn anneal_p(progress: f64) -> f64 {
    anneal_between(progress, P_START, P_END)
}

pub fn anneal_between(progress: f64, start: f64, end: f64) -> f64 {
    let t = progress.clamp(0.0, 1.0);
    start * (1.0 - t) + end * t
}

/// Record of one saved parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub id: u64,
    pub style: Style,
    /// Learner step at which the parameters were saved.
    pub step: u64,
    /// Environment ticks the learner had consumed at save time.
    #[serde(default)]
    pub ticks: u64,
    /// Path relative to the pool directory.
    pub file: String,
    /// Seconds since the Unix epoch.
    pub saved_at: u64,
}

impl SnapshotMeta {
    pub fn key(&self) -> SnapshotKey {
        SnapshotKey { style: self.style, id: self.id }
    }
}

/// A read-only view of the snapshots an agent may face.
#[derive(Debug, Clone, PartialEq)]
pub struct OpponentPool {
    entries: Vec<SnapshotMeta>,
    pub k: usize,
    pub p: f64,
}

impl OpponentPool {
    /// `entries` in registration order.
    pub fn new(entries: Vec<SnapshotMeta>, k: usize, p: f64) -> Self {
        assert!(k >= 1, "recency parameter k must be at least one");
        OpponentPool { entries, k, p }
    }

    pub fn entries(&self) -> &[SnapshotMeta] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Indices of the most recent `k` snapshots of every style, and of all the others.
    pub fn partition(&self) -> (Vec<usize>, Vec<usize>) {
        let mut seen: Vec<(Style, usize)> = Vec::new();
        let mut recent = vec![false; self.entries.len()];
        for (i, e) in self.entries.iter().enumerate().rev() {
            let slot = match seen.iter_mut().find(|(s, _)| *s == e.style) {
                Some(slot) => slot,
                None => {
                    seen.push((e.style, 0));
                    seen.last_mut().expect("just pushed")
                }
            };
            if slot.1 < self.k {
                slot.1 += 1;
                recent[i] = true;
            }
        }
        (0..self.entries.len()).partition(|&i| recent[i])
    }

    /// Probability of drawing each entry.
    pub fn probabilities(&self) -> Vec<f64> {
        let (recent, older) = self.partition();
        let mut probs = vec![0.0; self.entries.len()];
        let p_recent = if older.is_empty() { 1.0 } else { self.p };
        for &i in &recent {
            probs[i] = p_recent / recent.len() as f64;
        }
        for &i in &older {
            probs[i] = (1.0 - p_recent) / older.len() as f64;
        }
        probs
    }

    /// Draw an opponent: uniform over the recent set with probability `p`, otherwise
    /// uniform over the older snapshots.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize, PoolError> {
        if self.entries.is_empty() {
            return Err(PoolError::NotReady);
        }
        let (recent, older) = self.partition();
        let use_recent = older.is_empty() || rng.random::<f64>() < self.p;
        let set = if use_recent { &recent } else { &older };
        Ok(set[rng.random_range(0..set.len())])
    }

    pub fn sample_opponent<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&SnapshotMeta, PoolError> {
        self.sample_index(rng).map(|i| &self.entries[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn meta(id: u64, style: Style) -> SnapshotMeta {
        SnapshotMeta { id, style, step: id, ticks: 0, file: String::new(), saved_at: 0 }
    }

    #[test]
    fn anneal_endpoints() {
        assert_eq!(anneal_p(0.0), 0.8);
        assert_eq!(anneal_p(1.0), 0.1);
        assert!((anneal_p(0.5) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn empty_pool_is_not_ready() {
        let pool = OpponentPool::new(vec![], 5, 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(pool.sample_opponent(&mut rng), Err(PoolError::NotReady)));
    }

    #[test]
    fn recent_only_pool_gets_all_mass() {
        let pool = OpponentPool::new((0..4).map(|i| meta(i, Style::Balanced)).collect(), 5, 0.8);
        let probs = pool.probabilities();
        assert!(probs.iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn recent_set_spans_styles() {
        let mut entries = Vec::new();
        for i in 0..21 {
            entries.push(meta(i, Style::SHAPED[(i % 3) as usize]));
        }
        let pool = OpponentPool::new(entries, 5, 0.8);
        let (recent, older) = pool.partition();
        assert_eq!(recent.len(), 15);
        assert_eq!(older.len(), 6);
        let probs = pool.probabilities();
        for &i in &recent {
            assert!((probs[i] - 0.8 / 15.0).abs() < 1e-15);
        }
        assert!(older.iter().all(|&i| i < 6));
    }
}
