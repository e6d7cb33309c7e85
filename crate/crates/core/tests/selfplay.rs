use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::Path;

use duelist_core::arena::{Arena, Style};
use duelist_core::pipeline::{read_episodes, OpponentRef};
use duelist_core::selfplay::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn pool_of(per_style: u64) -> OpponentPool {
    let mut entries = Vec::new();
    let mut id = 0;
    for step in 0..per_style {
        for style in Style::SHAPED {
            entries.push(SnapshotMeta { id, style, step, ticks: 0, file: String::new(), saved_at: 0 });
            id += 1;
        }
    }
    OpponentPool::new(entries, 5, 0.8)
}

#[test]
fn recent_set_frequency_and_per_snapshot_chi_square() {
    let pool = pool_of(12);
    let (recent, _) = pool.partition();
    assert_eq!(recent.len(), 15);
    let probs = pool.probabilities();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = vec![0u64; pool.len()];
    for _ in 0..draws {
        counts[pool.sample_index(&mut rng).unwrap()] += 1;
    }
    let hits: u64 = recent.iter().map(|&i| counts[i]).sum();
    let freq = hits as f64 / draws as f64;
    assert!((freq - 0.8).abs() <= 0.01, "recent frequency {freq}");

    let stat: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(&c, &p)| {
            let e = p * draws as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (pool.len() - 1) as f64;
    let p_value = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
    assert!(p_value > 0.01, "chi-square {stat} on {dof} dof, p = {p_value}");
}

#[test]
fn anneal_endpoints_are_exact() {
    assert_eq!(anneal_p(0.0), 0.8);
    assert_eq!(anneal_p(1.0), 0.1);
    assert_eq!(anneal_p(2.0), 0.1);
    assert!((anneal_p(0.5) - 0.45).abs() < 1e-12);
}

fn small_config(dir: &Path, workers: usize) -> CurriculumConfig {
    let mut cfg = CurriculumConfig {
        ticks_per_style: 2_500,
        snapshot_every: 2,
        output_dir: dir.to_path_buf(),
        seed: 17,
        ..CurriculumConfig::default()
    };
    cfg.trainer.workers = workers;
    cfg.trainer.hidden = 8;
    cfg.trainer.warmup_episodes = 1;
    cfg.trainer.updates_per_episode = 2.0;
    cfg.trainer.learner.batch_size = 2;
    cfg
}

fn pool_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(pool_dir(dir))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn fixed_seed_runs_write_identical_snapshots() {
    let arena = Arena::default();
    for workers in [1, 3] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run_curriculum(&arena, &small_config(a.path(), workers), |_, _| {}).unwrap();
        let rb = run_curriculum(&arena, &small_config(b.path(), workers), |_, _| {}).unwrap();
        let (fa, fb) = (pool_files(a.path()), pool_files(b.path()));
        assert!(fa.len() > 3, "only {} snapshots", fa.len());
        assert_eq!(fa, fb);
        for s in Style::SHAPED {
            assert_eq!(fs::read(ra.checkpoint(s).unwrap()).unwrap(), fs::read(rb.checkpoint(s).unwrap()).unwrap());
        }
    }
}

#[test]
fn crashed_worker_is_respawned() {
    let arena = Arena::default();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 2);
    cfg.trainer.fault_episode = Some(1);
    let mut rounds_with_crash = 0;
    let report = run_curriculum(&arena, &cfg, |_, r| {
        if r.crashes > 0 {
            rounds_with_crash += 1;
            assert_eq!(r.episodes, 2, "the respawned worker still delivers its episode");
        }
    })
    .unwrap();
    assert_eq!(report.crashes, 3, "one crash per style");
    assert_eq!(rounds_with_crash, 3);
    assert!(report.styles.iter().all(|s| s.ticks >= cfg.ticks_per_style));
}

#[test]
fn resume_continues_from_latest_snapshot() {
    let arena = Arena::default();
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1);
    let first = run_curriculum(&arena, &cfg, |_, _| {}).unwrap();
    let resumed_cfg = CurriculumConfig { resume: true, ticks_per_style: 5_000, ..cfg };
    let second = run_curriculum(&arena, &resumed_cfg, |_, _| {}).unwrap();
    for (a, b) in first.styles.iter().zip(&second.styles) {
        assert!(b.learner_steps > a.learner_steps, "{a:?} -> {b:?}");
        assert!(b.snapshots > a.snapshots);
    }
    let store = SnapshotStore::open(pool_dir(dir.path())).unwrap();
    let zero_steps = store.entries().iter().filter(|e| e.step == 0).count();
    assert_eq!(zero_steps, 3, "initial snapshots are registered once");
}

#[test]
fn independent_pools_never_mix_styles() {
    let arena = Arena::default();
    let dir = tempfile::tempdir().unwrap();
    let cfg = CurriculumConfig { mode: PoolMode::Independent, log_episodes: true, ..small_config(dir.path(), 2) };
    run_curriculum(&arena, &cfg, |_, _| {}).unwrap();
    for style in Style::SHAPED {
        let f = fs::File::open(dir.path().join(format!("episodes-{}.log", style.name()))).unwrap();
        let episodes = read_episodes(BufReader::new(f)).unwrap();
        assert!(!episodes.is_empty());
        let mut faced_snapshot = false;
        for ep in episodes {
            assert_eq!(ep.style, style);
            match ep.opponent {
                OpponentRef::Snapshot(key) => {
                    assert_eq!(key.style, style);
                    faced_snapshot = true;
                }
                OpponentRef::MirrorSelf => {}
                other => panic!("unexpected opponent {other:?}"),
            }
        }
        assert!(faced_snapshot);
    }
}

#[test]
fn shared_pool_crosses_styles() {
    let arena = Arena::default();
    let dir = tempfile::tempdir().unwrap();
    let cfg = CurriculumConfig { log_episodes: true, ..small_config(dir.path(), 2) };
    run_curriculum(&arena, &cfg, |_, _| {}).unwrap();
    let f = fs::File::open(dir.path().join("episodes-balanced.log")).unwrap();
    let episodes = read_episodes(BufReader::new(f)).unwrap();
    let other = episodes
        .iter()
        .filter(|e| matches!(e.opponent, OpponentRef::Snapshot(k) if k.style != Style::Balanced))
        .count();
    assert!(other > 0, "balanced never faced another style");
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = CurriculumConfig { mode: PoolMode::Baseline, k: 3, ..CurriculumConfig::default() };
    let back = CurriculumConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
    assert_eq!(back, cfg);
    assert!(CurriculumConfig::from_toml_str("k = 0").is_err());
    assert!(CurriculumConfig::from_toml_str("unknown_key = 1").is_err());
}
