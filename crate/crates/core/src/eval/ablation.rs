use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::matches::{match_seed, play_matches, MatchReport};
use super::policy::{NetPolicy, ScriptedConfig, ScriptedPolicy};
use crate::arena::{Arena, Style};
use crate::error::EvalError;
use crate::pipeline::OpponentRef;
use crate::policy::{load_checkpoint, NetworkParams};
use crate::selfplay::{fixed_opponent, pool_dir, SnapshotMeta, SnapshotStore, StyleTrainer, TrainerConfig};

/// Load a checkpoint, reporting a missing file by name.
pub fn load_artifact(path: &Path) -> Result<Arc<NetworkParams<f32>>, EvalError> {
    if !path.exists() {
        return Err(EvalError::MissingArtifact(path.display().to_string()));
    }
    Ok(Arc::new(load_checkpoint(path)?))
}

fn net(params: &Arc<NetworkParams<f32>>, label: &str, maintenance: u32) -> NetPolicy {
    NetPolicy::new(params.clone()).with_maintenance(maintenance).with_label(label)
}

/// Training against the scripted opponent until a win-rate threshold is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub trainer: TrainerConfig,
    pub opponent: ScriptedConfig,
    pub threshold: f64,
    pub budget_ticks: u64,
    /// Environment ticks between evaluations.
    pub eval_every: u64,
    pub eval_matches: u64,
    /// Stop once the learner has taken this many steps without reaching the threshold.
    pub max_steps: Option<u64>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            trainer: TrainerConfig::default(),
            opponent: ScriptedConfig { attack_chance: 0.1, ..ScriptedConfig::default() },
            threshold: 0.8,
            budget_ticks: 1_000_000,
            eval_every: 20_000,
            eval_matches: 100,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub ticks: u64,
    pub win_rate: f64,
    pub move_entropy: f64,
    pub skill_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRun {
    pub seed: u64,
    pub skip_passive: bool,
    /// First evaluation at or above the threshold.
    pub reached: Option<CurvePoint>,
    pub curve: Vec<CurvePoint>,
    pub final_step: u64,
}

impl ThresholdRun {
    /// Learner steps to the threshold, infinite for runs that never got there.
    pub fn steps_to_threshold(&self) -> f64 {
        self.reached.map_or(f64::INFINITY, |p| p.step as f64)
    }
}

pub fn train_to_threshold(arena: &Arena, cfg: &ThresholdConfig, seed: u64) -> Result<ThresholdRun, EvalError> {
    let mut trainer = StyleTrainer::new(arena, Style::Baseline, Style::Baseline.config(), cfg.trainer, seed);
    let opponent = cfg.opponent;
    let factory = fixed_opponent(move || ScriptedPolicy::new(opponent), OpponentRef::Scripted);
    let mut curve = Vec::new();
    let mut next_eval = cfg.eval_every;
    let mut reached = None;
    loop {
        let capped = cfg.max_steps.is_some_and(|m| trainer.learner.step() >= m);
        if trainer.ticks >= cfg.budget_ticks || capped {
            break;
        }
        let round = trainer.run_round(arena, &factory, 0);
        let stopping = trainer.ticks >= cfg.budget_ticks || cfg.max_steps.is_some_and(|m| trainer.learner.step() >= m);
        if trainer.ticks < next_eval && !stopping {
            continue;
        }
        while next_eval <= trainer.ticks {
            next_eval += cfg.eval_every;
        }
        let agent = trainer.current_policy();
        let report = play_matches(arena, || agent.clone(), || ScriptedPolicy::new(opponent), cfg.eval_matches, match_seed(seed, trainer.ticks))?;
        let point = CurvePoint {
            step: trainer.learner.step(),
            ticks: trainer.ticks,
            win_rate: report.win_rate_a,
            move_entropy: round.move_entropy,
            skill_entropy: round.skill_entropy,
        };
        curve.push(point);
        if report.win_rate_a >= cfg.threshold {
            reached = Some(point);
            break;
        }
    }
    Ok(ThresholdRun { seed, skip_passive: cfg.trainer.skip_passive, reached, curve, final_step: trainer.learner.step() })
}

/// Move-head entropy over a fixed number of learner steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntropyConfig {
    pub trainer: TrainerConfig,
    pub opponent: ScriptedConfig,
    pub budget_steps: u64,
    /// Fraction of the run, counted from its end, averaged into the final entropy.
    pub tail_fraction: f64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            trainer: TrainerConfig::default(),
            opponent: ScriptedConfig { attack_chance: 0.1, ..ScriptedConfig::default() },
            budget_steps: 2000,
            tail_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub step: u64,
    pub ticks: u64,
    pub move_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRun {
    pub seed: u64,
    pub maintenance: u32,
    pub curve: Vec<EntropyPoint>,
    /// Mean move entropy over the tail of the run.
    pub final_entropy: f64,
}

pub fn entropy_curve(arena: &Arena, cfg: &EntropyConfig, maintenance: u32, seed: u64) -> Result<EntropyRun, EvalError> {
    let tc = TrainerConfig { maintenance, ..cfg.trainer };
    let mut trainer = StyleTrainer::new(arena, Style::Baseline, Style::Baseline.config(), tc, seed);
    let opponent = cfg.opponent;
    let factory = fixed_opponent(move || ScriptedPolicy::new(opponent), OpponentRef::Scripted);
    let mut curve = Vec::new();
    while trainer.learner.step() < cfg.budget_steps {
        let round = trainer.run_round(arena, &factory, 0);
        curve.push(EntropyPoint { step: trainer.learner.step(), ticks: trainer.ticks, move_entropy: round.move_entropy });
    }
    let from = (cfg.budget_steps as f64 * (1.0 - cfg.tail_fraction)) as u64;
    let tail: Vec<f64> = curve.iter().filter(|p| p.step >= from).map(|p| p.move_entropy).collect();
    let final_entropy = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    Ok(EntropyRun { seed, maintenance, curve, final_entropy })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Up to `count` snapshots of `style`, spaced evenly through its history.
pub fn spaced_snapshots(entries: &[SnapshotMeta], style: Style, count: usize) -> Vec<SnapshotMeta> {
    let mut own: Vec<SnapshotMeta> = entries.iter().filter(|e| e.style == style).cloned().collect();
    own.sort_by_key(|e| (e.step, e.id));
    if own.len() <= count || count == 0 {
        return own;
    }
    (0..count).map(|i| own[i * (own.len() - 1) / (count - 1).max(1)].clone()).collect()
}

/// One cell of a styles-by-arms table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub row: String,
    pub style: String,
    pub matches: u64,
    pub wins: u64,
    pub win_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
}

impl TableRow {
    fn from_report(row: &str, style: &str, r: &MatchReport) -> Self {
        TableRow {
            row: row.into(),
            style: style.into(),
            matches: r.matches,
            wins: r.wins_a,
            win_rate: r.win_rate_a,
            ci_low: r.ci95.0,
            ci_high: r.ci95.1,
            p_value: r.p_value_better(),
        }
    }

    /// Pools the cells of one row into an `average` cell.
    fn pooled(row: &str, cells: &[TableRow]) -> Self {
        let matches: u64 = cells.iter().map(|c| c.matches).sum();
        let wins: u64 = cells.iter().map(|c| c.wins).sum();
        let (lo, hi) = super::matches::wilson_interval(wins, matches, 1.96);
        TableRow {
            row: row.into(),
            style: "average".into(),
            matches,
            wins,
            win_rate: wins as f64 / matches.max(1) as f64,
            ci_low: lo,
            ci_high: hi,
            p_value: super::matches::binomial_upper_tail(wins, matches, 0.5),
        }
    }
}

/// Each styled agent against the baseline: one row, a column per style plus the average.
pub fn styles_vs_baseline(
    arena: &Arena,
    agents: &[(Style, PathBuf)],
    baseline: &Path,
    matches: u64,
    maintenance: u32,
    seed: u64,
) -> Result<Vec<TableRow>, EvalError> {
    let base = load_artifact(baseline)?;
    let mut cells = Vec::new();
    for (i, (style, path)) in agents.iter().enumerate() {
        let params = load_artifact(path)?;
        let r = play_matches(
            arena,
            || net(&params, style.name(), maintenance),
            || net(&base, "baseline", maintenance),
            matches,
            match_seed(seed, i as u64),
        )?;
        cells.push(TableRow::from_report("vs-baseline", style.name(), &r));
    }
    cells.push(TableRow::pooled("vs-baseline", &cells));
    Ok(cells)
}

/// Shared-pool and independent agents of each style against the other styles' independent snapshots.
pub fn cross_evaluation(
    arena: &Arena,
    shared_dir: &Path,
    independent_dir: &Path,
    styles: &[Style],
    snapshots_per_style: usize,
    matches_per_pair: u64,
    maintenance: u32,
    seed: u64,
) -> Result<Vec<TableRow>, EvalError> {
    let ind_pool = pool_dir(independent_dir);
    if !ind_pool.exists() {
        return Err(EvalError::MissingArtifact(ind_pool.display().to_string()));
    }
    let store = SnapshotStore::open(ind_pool)?;
    let entries = store.entries();
    let mut rows = Vec::new();
    for (label, dir) in [("shared", shared_dir), ("independent", independent_dir)] {
        let mut cells = Vec::new();
        for (si, &style) in styles.iter().enumerate() {
            let agent = load_artifact(&dir.join(format!("final-{}.ckpt", style.name())))?;
            let mut combined: Vec<MatchReport> = Vec::new();
            for (oi, &other) in styles.iter().enumerate().filter(|(_, s)| **s != style) {
                let picks = spaced_snapshots(&entries, other, snapshots_per_style);
                if picks.is_empty() {
                    return Err(EvalError::MissingArtifact(format!("independent snapshots of {other}")));
                }
                for (k, meta) in picks.iter().enumerate() {
                    let opp = store.load(meta)?;
                    let s = match_seed(seed, ((si * 31 + oi) * 1024 + k) as u64);
                    combined.push(play_matches(
                        arena,
                        || net(&agent, style.name(), maintenance),
                        || net(&opp, other.name(), maintenance),
                        matches_per_pair,
                        s,
                    )?);
                }
            }
            let results = combined.into_iter().flat_map(|r| r.results).collect();
            let merged = MatchReport::from_results(format!("{label}-{style}"), "independent".into(), results);
            cells.push(TableRow::from_report(label, style.name(), &merged));
        }
        cells.push(TableRow::pooled(label, &cells));
        rows.extend(cells);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub style: String,
    pub matches: u64,
    pub mean_ticks: f64,
    pub mean_seconds: f64,
}

/// Mean game length of each style's agent playing itself.
pub fn game_lengths(arena: &Arena, agents: &[(Style, PathBuf)], matches: u64, maintenance: u32, seed: u64) -> Result<Vec<LengthRow>, EvalError> {
    let mut rows = Vec::new();
    for (i, (style, path)) in agents.iter().enumerate() {
        let params = load_artifact(path)?;
        let r = play_matches(arena, || net(&params, style.name(), maintenance), || net(&params, style.name(), maintenance), matches, match_seed(seed, i as u64))?;
        rows.push(LengthRow {
            style: style.name().into(),
            matches: r.matches,
            mean_ticks: r.mean_ticks,
            mean_seconds: r.mean_ticks * arena.roster().arena.tick_seconds,
        });
    }
    Ok(rows)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), EvalError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), EvalError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::other)?;
    for r in rows {
        w.serialize(r).map_err(std::io::Error::other)?;
    }
    w.flush()?;
    Ok(())
}

/// Which experiment of the suite to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Steps to the win-rate threshold with and without passive no-op skipping.
    Skip,
    /// Move entropy for maintenance windows of 1 and 10 ticks.
    Maintain,
    /// Shared against independent pools, cross-evaluated.
    Pool,
    /// Styled agents against the baseline.
    Baseline,
    /// Self-play game length of each style.
    Lengths,
}

impl std::str::FromStr for Suite {
    type Err = crate::error::ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skip" => Ok(Suite::Skip),
            "maintain" => Ok(Suite::Maintain),
            "pool" => Ok(Suite::Pool),
            "baseline" => Ok(Suite::Baseline),
            "lengths" => Ok(Suite::Lengths),
            other => Err(crate::error::ConfigError::Invalid(format!("unknown suite {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub seeds: Vec<u64>,
    pub threshold: ThresholdConfig,
    pub entropy: EntropyConfig,
    /// Output of a shared-pool curriculum run (`final-{style}.ckpt`).
    pub shared_dir: PathBuf,
    /// Output of an independent-pool curriculum run.
    pub independent_dir: PathBuf,
    /// Output of a baseline run (`final-baseline.ckpt`).
    pub baseline_dir: PathBuf,
    pub matches: u64,
    pub snapshots_per_style: usize,
    pub maintenance: u32,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            seeds: vec![1, 2, 3],
            threshold: ThresholdConfig::default(),
            entropy: EntropyConfig::default(),
            shared_dir: PathBuf::from("runs/shared"),
            independent_dir: PathBuf::from("runs/independent"),
            baseline_dir: PathBuf::from("runs/baseline"),
            matches: 300,
            snapshots_per_style: 10,
            maintenance: crate::pipeline::DEFAULT_MAINTENANCE,
        }
    }
}

impl AblationConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, crate::error::ConfigError> {
        toml::from_str(s).map_err(|e| crate::error::ConfigError::Parse(e.to_string()))
    }

    fn styled_agents(&self) -> Vec<(Style, PathBuf)> {
        Style::SHAPED.iter().map(|&s| (s, self.shared_dir.join(format!("final-{}.ckpt", s.name())))).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
struct CurveRow {
    arm: String,
    seed: u64,
    step: u64,
    ticks: u64,
    value: f64,
}

/// Run one suite, writing `{suite}.jsonl` and `{suite}.csv` under `out`; returns a summary.
pub fn run_ablation(arena: &Arena, cfg: &AblationConfig, suite: Suite, out: &Path) -> Result<serde_json::Value, EvalError> {
    use serde_json::json;
    match suite {
        Suite::Skip => {
            let mut runs = Vec::new();
            for skip in [true, false] {
                for &seed in &cfg.seeds {
                    let mut t = cfg.threshold.clone();
                    t.trainer.skip_passive = skip;
                    runs.push(train_to_threshold(arena, &t, seed)?);
                }
            }
            let arm = |r: &ThresholdRun| if r.skip_passive { "skip" } else { "no_skip" };
            let rows: Vec<CurveRow> = runs
                .iter()
                .flat_map(|r| r.curve.iter().map(move |p| CurveRow { arm: arm(r).into(), seed: r.seed, step: p.step, ticks: p.ticks, value: p.win_rate }))
                .collect();
            write_jsonl(&out.join("skip.jsonl"), &runs)?;
            write_csv(&out.join("skip.csv"), &rows)?;
            let med = |skip: bool| median(&runs.iter().filter(|r| r.skip_passive == skip).map(ThresholdRun::steps_to_threshold).collect::<Vec<_>>());
            Ok(json!({
                "suite": "skip",
                "threshold": cfg.threshold.threshold,
                "median_steps_skip": med(true),
                "median_steps_no_skip": med(false),
                "reached_skip": runs.iter().filter(|r| r.skip_passive && r.reached.is_some()).count(),
                "reached_no_skip": runs.iter().filter(|r| !r.skip_passive && r.reached.is_some()).count(),
            }))
        }
        Suite::Maintain => {
            let mut runs = Vec::new();
            for n in [1, 10] {
                for &seed in &cfg.seeds {
                    runs.push(entropy_curve(arena, &cfg.entropy, n, seed)?);
                }
            }
            let rows: Vec<CurveRow> = runs
                .iter()
                .flat_map(|r| r.curve.iter().map(move |p| CurveRow { arm: format!("n{}", r.maintenance), seed: r.seed, step: p.step, ticks: p.ticks, value: p.move_entropy }))
                .collect();
            write_jsonl(&out.join("maintain.jsonl"), &runs)?;
            write_csv(&out.join("maintain.csv"), &rows)?;
            let med = |n: u32| median(&runs.iter().filter(|r| r.maintenance == n).map(|r| r.final_entropy).collect::<Vec<_>>());
            Ok(json!({ "suite": "maintain", "median_entropy_n1": med(1), "median_entropy_n10": med(10) }))
        }
        Suite::Pool => {
            let rows = cross_evaluation(
                arena,
                &cfg.shared_dir,
                &cfg.independent_dir,
                &Style::SHAPED,
                cfg.snapshots_per_style,
                cfg.matches,
                cfg.maintenance,
                cfg.seeds.first().copied().unwrap_or(0),
            )?;
            write_jsonl(&out.join("pool.jsonl"), &rows)?;
            write_csv(&out.join("pool.csv"), &rows)?;
            Ok(json!({ "suite": "pool", "table": rows }))
        }
        Suite::Baseline => {
            let baseline = cfg.baseline_dir.join("final-baseline.ckpt");
            let rows = styles_vs_baseline(arena, &cfg.styled_agents(), &baseline, cfg.matches, cfg.maintenance, cfg.seeds.first().copied().unwrap_or(0))?;
            write_jsonl(&out.join("baseline.jsonl"), &rows)?;
            write_csv(&out.join("baseline.csv"), &rows)?;
            Ok(json!({ "suite": "baseline", "table": rows }))
        }
        Suite::Lengths => {
            let rows = game_lengths(arena, &cfg.styled_agents(), cfg.matches, cfg.maintenance, cfg.seeds.first().copied().unwrap_or(0))?;
            write_jsonl(&out.join("lengths.jsonl"), &rows)?;
            write_csv(&out.join("lengths.csv"), &rows)?;
            Ok(json!({ "suite": "lengths", "table": rows }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(style: Style, step: u64) -> SnapshotMeta {
        SnapshotMeta { id: step, style, step, ticks: 0, file: String::new(), saved_at: 0 }
    }

    #[test]
    fn spaced_snapshots_cover_history_end_to_end() {
        let entries: Vec<_> = (0..31).map(|s| meta(Style::Balanced, s * 50)).chain([meta(Style::Aggressive, 7)]).collect();
        let picks = spaced_snapshots(&entries, Style::Balanced, 10);
        assert_eq!(picks.len(), 10);
        assert_eq!(picks[0].step, 0);
        assert_eq!(picks[9].step, 1500);
        assert!(picks.windows(2).all(|w| w[0].step < w[1].step));
        assert_eq!(spaced_snapshots(&entries, Style::Aggressive, 10).len(), 1);
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn missing_pool_run_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = AblationConfig {
            shared_dir: dir.path().join("shared"),
            independent_dir: dir.path().join("independent"),
            ..AblationConfig::default()
        };
        let err = run_ablation(&Arena::default(), &cfg, Suite::Pool, dir.path()).unwrap_err();
        assert!(matches!(err, EvalError::MissingArtifact(ref a) if a.contains("independent")), "{err}");
        let err = run_ablation(&Arena::default(), &cfg, Suite::Baseline, dir.path()).unwrap_err();
        assert!(err.to_string().contains("final-baseline.ckpt"), "{err}");
    }

    #[test]
    fn missing_checkpoint_is_named() {
        let err = load_artifact(Path::new("/nonexistent/final-aggressive.ckpt")).unwrap_err();
        assert!(err.to_string().contains("final-aggressive.ckpt"), "{err}");
    }
}
