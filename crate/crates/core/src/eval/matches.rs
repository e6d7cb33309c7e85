use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::policy::Policy;
use super::rollout::{play_episode, EpisodeOptions, MatchResult};
use crate::arena::{Arena, Outcome, Side};
use crate::error::EvalError;

/// Seed of the `i`-th match of a series.
pub fn match_seed(seed: u64, i: u64) -> u64 {
    let mut z = seed ^ i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Wilson score interval for `wins` successes out of `n` at normal quantile `z`.
pub fn wilson_interval(wins: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = wins as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let b = Binomial::new(p, n).expect("valid binomial parameters");
    b.sf(k - 1)
}

/// Two-sided binomial test p-value (doubling the smaller tail, capped at one).
pub fn binomial_two_sided(k: u64, n: u64, p: f64) -> f64 {
    let b = Binomial::new(p, n).expect("valid binomial parameters");
    let lower = b.cdf(k);
    let upper = binomial_upper_tail(k, n, p);
    (2.0 * lower.min(upper)).min(1.0)
}

/// Outcome of a series of matches between `A` and `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub policy_a: String,
    pub policy_b: String,
    pub matches: u64,
    pub wins_a: u64,
    pub wins_b: u64,
    pub draws: u64,
    pub win_rate_a: f64,
    pub ci95: (f64, f64),
    pub mean_ticks: f64,
    /// Per-match results with the agent side always being `A`.
    #[serde(skip)]
    pub results: Vec<MatchResult>,
}

impl MatchReport {
    pub fn from_results(policy_a: String, policy_b: String, results: Vec<MatchResult>) -> Self {
        let matches = results.len() as u64;
        let wins_a = results.iter().filter(|r| r.outcome == Outcome::AgentWin).count() as u64;
        let wins_b = results.iter().filter(|r| r.outcome == Outcome::OpponentWin).count() as u64;
        let mean_ticks = if matches == 0 {
            0.0
        } else {
            results.iter().map(|r| f64::from(r.ticks)).sum::<f64>() / matches as f64
        };
        MatchReport {
            policy_a,
            policy_b,
            matches,
            wins_a,
            wins_b,
            draws: matches - wins_a - wins_b,
            win_rate_a: if matches == 0 { 0.0 } else { wins_a as f64 / matches as f64 },
            ci95: wilson_interval(wins_a, matches, 1.959_963_984_540_054),
            mean_ticks,
            results,
        }
    }

    /// One-sided p-value for "A wins more than half of all matches".
    pub fn p_value_better(&self) -> f64 {
        binomial_upper_tail(self.wins_a, self.matches, 0.5)
    }
}

fn flip(mut r: MatchResult) -> MatchResult {
    r.outcome = r.outcome.swapped();
    r.damage_dealt.swap(0, 1);
    r.final_hp.swap(0, 1);
    r.skill_counts.swap(0, 1);
    if let Some(t) = r.trace.as_mut() {
        for pair in t.iter_mut() {
            pair.swap(0, 1);
        }
    }
    r
}

/// Play `count` matches between fresh instances of `A` and `B`, in parallel.
///
/// `A` takes the agent side in even-numbered matches and the opponent side in odd ones;
/// results are reported from `A`'s side. Deterministic for a given seed regardless of
/// thread count.
pub fn play_matches<A, B, FA, FB>(arena: &Arena, make_a: FA, make_b: FB, count: u64, seed: u64) -> Result<MatchReport, EvalError>
where
    A: Policy,
    B: Policy,
    FA: Fn() -> A + Sync,
    FB: Fn() -> B + Sync,
{
    let (name_a, name_b) = (make_a().name(), make_b().name());
    let results = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut a = make_a();
            let mut b = make_b();
            let s = match_seed(seed, i);
            if i % 2 == 0 {
                Ok(play_episode(arena, &mut a, &mut b, s, EpisodeOptions::default())?.0)
            } else {
                Ok(flip(play_episode(arena, &mut b, &mut a, s, EpisodeOptions::default())?.0))
            }
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(MatchReport::from_results(name_a, name_b, results))
}

/// Shannon entropy (nats) of a distribution.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Mean per-state entropy of a set of move distributions.
pub fn move_policy_entropy(dists: &[Vec<f64>]) -> f64 {
    if dists.is_empty() {
        return 0.0;
    }
    dists.iter().map(|d| entropy(d)).sum::<f64>() / dists.len() as f64
}

/// Which side won, if any, given a result reported from `A`'s side.
pub fn winner_label(r: &MatchResult) -> &'static str {
    match r.winner() {
        Some(Side::Agent) => "a",
        Some(Side::Opponent) => "b",
        None => "draw",
    }
}
