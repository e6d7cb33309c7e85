use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pool::{anneal_between, OpponentPool, SnapshotMeta, DEFAULT_RECENT_K, P_END, P_START};
use super::store::SnapshotStore;
use super::trainer::{RoundReport, StyleTrainer, TrainerConfig};
use crate::arena::{Arena, Style, StyleConfig};
use crate::error::{ConfigError, EvalError};
use crate::eval::{NetPolicy, Policy};
use crate::pipeline::{EpisodeWriter, OpponentRef};
use crate::policy::save_checkpoint;

/// Who an agent's opponents are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// All styles share one pool.
    Shared,
    /// Every style only ever faces its own snapshots.
    Independent,
    /// A single learner with win and HP rewards only, against its own snapshots.
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    pub mode: PoolMode,
    pub styles: Vec<Style>,
    /// Reward weight overrides keyed by style name.
    pub style_weights: BTreeMap<String, StyleConfig>,
    /// Environment ticks each style trains for.
    pub ticks_per_style: u64,
    /// Recent snapshots per style that share the mass `p`.
    pub k: usize,
    pub p_start: f64,
    pub p_end: f64,
    /// Learner steps between snapshots.
    pub snapshot_every: u64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Continue from the latest snapshot of each style found in `output_dir`.
    pub resume: bool,
    /// Write every collected episode to `episodes-{style}.log`.
    pub log_episodes: bool,
    pub trainer: TrainerConfig,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig {
            mode: PoolMode::Shared,
            styles: Style::SHAPED.to_vec(),
            style_weights: BTreeMap::new(),
            ticks_per_style: 200_000,
            k: DEFAULT_RECENT_K,
            p_start: P_START,
            p_end: P_END,
            snapshot_every: 50,
            seed: 0,
            output_dir: PathBuf::from("runs/curriculum"),
            resume: false,
            log_episodes: false,
            trainer: TrainerConfig::default(),
        }
    }
}

impl CurriculumConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: CurriculumConfig = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("curriculum config serializes")
    }

    /// The styles that train, after applying the mode.
    pub fn learners(&self) -> Vec<Style> {
        match self.mode {
            PoolMode::Baseline => vec![Style::Baseline],
            _ => self.styles.clone(),
        }
    }

    pub fn reward(&self, style: Style) -> StyleConfig {
        self.style_weights.get(style.name()).copied().unwrap_or_else(|| style.config())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.learners().is_empty() {
            return bad("no styles configured");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.p_start) || !(0.0..=1.0).contains(&self.p_end) {
            return bad("p endpoints must lie in [0, 1]");
        }
        if self.trainer.workers == 0 {
            return bad("at least one worker is required");
        }
        if self.trainer.maintenance == 0 {
            return bad("maintenance window must be at least one tick");
        }
        for (name, w) in &self.style_weights {
            name.parse::<Style>()?;
            w.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSummary {
    pub style: Style,
    pub learner_steps: u64,
    pub ticks: u64,
    pub episodes: u64,
    pub snapshots: usize,
    pub final_checkpoint: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumReport {
    pub styles: Vec<StyleSummary>,
    pub rounds: u64,
    pub crashes: u64,
    pub pool: Vec<SnapshotMeta>,
}

impl CurriculumReport {
    pub fn checkpoint(&self, style: Style) -> Option<&Path> {
        self.styles.iter().find(|s| s.style == style).map(|s| s.final_checkpoint.as_path())
    }
}

pub fn pool_dir(output: &Path) -> PathBuf {
    output.join("pool")
}

/// Snapshots a learner of `style` may face under `mode`.
pub fn visible_snapshots(entries: &[SnapshotMeta], mode: PoolMode, style: Style, styles: &[Style]) -> Vec<SnapshotMeta> {
    entries
        .iter()
        .filter(|e| match mode {
            PoolMode::Shared => styles.contains(&e.style),
            PoolMode::Independent | PoolMode::Baseline => e.style == style,
        })
        .cloned()
        .collect()
}

struct Outputs {
    metrics: Vec<BufWriter<File>>,
    episodes: Vec<Option<EpisodeWriter<BufWriter<File>>>>,
}

/// Train every configured style in lockstep rounds against the snapshot pool.
///
/// In each round every style plays `workers` episodes against a frozen view of the pool,
/// then runs its learner updates; snapshots that fell due are registered afterwards in
/// style order. The outcome is therefore a function of the configuration alone.
pub fn run_curriculum(
    arena: &Arena,
    config: &CurriculumConfig,
    mut on_round: impl FnMut(Style, &RoundReport),
) -> Result<CurriculumReport, EvalError> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;
    let store = SnapshotStore::open(pool_dir(&config.output_dir))?;
    let styles = config.learners();

    let mut trainers = Vec::with_capacity(styles.len());
    for (i, &style) in styles.iter().enumerate() {
        let seed = crate::eval::match_seed(config.seed, i as u64);
        let mut t = StyleTrainer::new(arena, style, config.reward(style), config.trainer, seed);
        if config.resume {
            if let Some(meta) = store.latest(style) {
                let params = store.load(&meta)?;
                t = StyleTrainer::with_params(style, config.reward(style), config.trainer, (*params).clone(), seed);
                t.learner.set_step(meta.step);
                t.ticks = meta.ticks;
            }
        }
        if t.learner.step() == 0 && config.snapshot_every > 0 && store.latest(style).is_none() {
            store.register(style, 0, 0, t.params())?;
        }
        trainers.push(t);
    }

    let append = |name: String| -> Result<BufWriter<File>, EvalError> {
        let f = OpenOptions::new().create(true).append(true).open(config.output_dir.join(name))?;
        Ok(BufWriter::new(f))
    };
    let mut outputs = Outputs { metrics: Vec::new(), episodes: Vec::new() };
    for &style in &styles {
        outputs.metrics.push(append(format!("metrics-{}.jsonl", style.name()))?);
        outputs.episodes.push(if config.log_episodes {
            let f = File::create(config.output_dir.join(format!("episodes-{}.log", style.name())))?;
            Some(EpisodeWriter::new(BufWriter::new(f))?)
        } else {
            None
        });
    }

    let mut rounds = 0;
    let mut crashes = 0;
    loop {
        let active: Vec<usize> = (0..trainers.len()).filter(|&i| trainers[i].ticks < config.ticks_per_style).collect();
        if active.is_empty() {
            break;
        }
        let entries = store.entries();
        let views: Vec<(usize, OpponentPool)> = active
            .iter()
            .map(|&i| {
                let t = &trainers[i];
                let progress = t.ticks as f64 / config.ticks_per_style.max(1) as f64;
                let p = anneal_between(progress, config.p_start, config.p_end);
                let visible = visible_snapshots(&entries, config.mode, t.style, &styles);
                (i, OpponentPool::new(visible, config.k, p))
            })
            .collect();

        let reports: Vec<(usize, RoundReport)> = trainers
            .par_iter_mut()
            .enumerate()
            .filter_map(|(i, t)| views.iter().find(|(j, _)| *j == i).map(|(_, pool)| (i, t, pool)))
            .map(|(i, t, pool)| {
                let mirror = Arc::new(t.params().clone());
                let maintenance = t.config.maintenance;
                let factory = |_w: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Result<(Box<dyn Policy>, OpponentRef), EvalError> {
                    let (params, oref) = match pool.sample_opponent(rng) {
                        Ok(meta) => (store.load(meta)?, OpponentRef::Snapshot(meta.key())),
                        Err(_) => (mirror.clone(), OpponentRef::MirrorSelf),
                    };
                    let policy = NetPolicy::new(params).with_maintenance(maintenance);
                    Ok((Box::new(policy), oref))
                };
                (i, t.run_round(arena, &factory, config.snapshot_every))
            })
            .collect();

        for (i, report) in reports {
            let t = &trainers[i];
            for (step, ticks, params) in &report.due_snapshots {
                // Storage failures are retried inside the store; a snapshot that still fails is skipped.
                let _ = store.register(t.style, *step, *ticks, params);
            }
            for u in &report.updates {
                let line = serde_json::json!({
                    "round": report.round,
                    "ticks": t.ticks,
                    "update": u,
                });
                writeln!(outputs.metrics[i], "{line}")?;
            }
            let summary = serde_json::json!({
                "round": report.round,
                "ticks": t.ticks,
                "episodes": report.episodes,
                "wins": report.wins,
                "losses": report.losses,
                "draws": report.draws,
                "crashes": report.crashes,
                "move_entropy": report.move_entropy,
                "skill_entropy": report.skill_entropy,
            });
            writeln!(outputs.metrics[i], "{summary}")?;
            if let Some(w) = outputs.episodes[i].as_mut() {
                for ep in t.learner.replay().newest_n(report.logged as usize) {
                    w.write(ep)?;
                }
            }
            crashes += report.crashes;
            on_round(t.style, &report);
        }
        rounds += 1;
    }

    let mut summaries = Vec::new();
    for (i, t) in trainers.iter().enumerate() {
        outputs.metrics[i].flush()?;
        if let Some(w) = outputs.episodes[i].take() {
            w.finish()?;
        }
        let path = config.output_dir.join(format!("final-{}.ckpt", t.style.name()));
        save_checkpoint(t.params(), &path)?;
        summaries.push(StyleSummary {
            style: t.style,
            learner_steps: t.learner.step(),
            ticks: t.ticks,
            episodes: t.episodes,
            snapshots: store.entries().iter().filter(|e| e.style == t.style).count(),
            final_checkpoint: path,
        });
    }
    Ok(CurriculumReport { styles: summaries, rounds, crashes, pool: store.entries() })
}
