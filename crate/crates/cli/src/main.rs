use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use duelist_core::arena::Arena;
use duelist_core::eval::{
    apply_reaction_delay, load_artifact, play_matches, run_ablation, write_csv, write_jsonl, AblationConfig, NetPolicy, NoOpPolicy, Policy,
    ScriptedPolicy, SingleAttackPolicy, Suite,
};
use duelist_core::pipeline::{dump_text, read_episodes};
use duelist_core::policy::NetworkParams;
use duelist_core::selfplay::{run_curriculum, CurriculumConfig, PoolMode};
use duelist_cli::server::{serve, ServerConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "duelist", version, about = "Train, evaluate and play against arena agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a self-play curriculum.
    Train(TrainArgs),
    /// Play matches between two policies.
    Eval(EvalArgs),
    /// Run one experiment of the ablation suite.
    Ablate(AblateArgs),
    /// Host live matches against an agent over a websocket.
    Serve(ServeArgs),
    /// Print an episode log as text, one line per transition.
    Dump(DumpArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Curriculum TOML; defaults apply for anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<PoolMode>,
    #[arg(long)]
    ticks: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// `noop`, `scripted`, `single:<skill>` or a checkpoint path.
    a: String,
    b: String,
    #[arg(long, default_value_t = 1000)]
    matches: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    maintenance: u32,
    /// Put the first policy under the reaction delay.
    #[arg(long)]
    delay_a: bool,
    #[arg(long)]
    jsonl: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    /// skip, maintain, pool, baseline or lengths.
    suite: Suite,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "runs/ablation")]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 8765)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 10.0)]
    tick_hz: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    record: Option<PathBuf>,
    /// Let the agent act without the reaction delay.
    #[arg(long)]
    no_delay: bool,
}

#[derive(Args)]
struct DumpArgs {
    log: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<PoolMode, String> {
    match s {
        "shared" => Ok(PoolMode::Shared),
        "independent" => Ok(PoolMode::Independent),
        "baseline" => Ok(PoolMode::Baseline),
        other => Err(format!("unknown mode {other}")),
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => CurriculumConfig::load(p)?,
        None => CurriculumConfig::default(),
    };
    cfg.output_dir = args.output.unwrap_or(cfg.output_dir);
    cfg.mode = args.mode.unwrap_or(cfg.mode);
    cfg.ticks_per_style = args.ticks.unwrap_or(cfg.ticks_per_style);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.trainer.workers = args.workers.unwrap_or(cfg.trainer.workers);
    cfg.resume |= args.resume;
    cfg.validate()?;

    let arena = Arena::default();
    let stdout = io::stdout();
    let report = run_curriculum(&arena, &cfg, |style, r| {
        let line = serde_json::json!({
            "style": style,
            "round": r.round,
            "ticks": r.ticks,
            "wins": r.wins,
            "losses": r.losses,
            "draws": r.draws,
            "updates": r.updates.len(),
            "move_entropy": r.move_entropy,
        });
        let _ = writeln!(stdout.lock(), "{line}");
    })?;
    println!("{}", serde_json::to_string(&report.styles)?);
    Ok(())
}

fn make_policy(spec: &str, maintenance: u32, cache: &Option<Arc<NetworkParams<f32>>>) -> Result<Box<dyn Policy>> {
    Ok(match spec {
        "noop" => Box::new(NoOpPolicy),
        "scripted" => Box::new(ScriptedPolicy::default()),
        s if s.starts_with("single:") => Box::new(SingleAttackPolicy { skill: s["single:".len()..].parse().context("single:<skill>")? }),
        path => {
            let params = cache.clone().context("checkpoint not loaded")?;
            Box::new(NetPolicy::new(params).with_maintenance(maintenance).with_label(path))
        }
    })
}

fn is_builtin(spec: &str) -> bool {
    spec == "noop" || spec == "scripted" || spec.starts_with("single:")
}

#[derive(Serialize)]
struct MatchRow {
    seed: u64,
    winner: &'static str,
    ticks: u32,
    damage_a: f64,
    damage_b: f64,
}

fn eval(args: EvalArgs) -> Result<()> {
    if args.matches == 0 {
        bail!("--matches must be at least 1");
    }
    let arena = Arena::default();
    let load = |s: &str| -> Result<Option<Arc<NetworkParams<f32>>>> {
        if is_builtin(s) {
            Ok(None)
        } else {
            let params = load_artifact(s.as_ref())?;
            params.shape().check_arena(&arena).with_context(|| format!("checkpoint {s} does not fit this arena"))?;
            Ok(Some(params))
        }
    };
    let (pa, pb) = (load(&args.a)?, load(&args.b)?);
    make_policy(&args.a, args.maintenance, &pa)?;
    make_policy(&args.b, args.maintenance, &pb)?;
    let make_a = || -> Box<dyn Policy> {
        let p = make_policy(&args.a, args.maintenance, &pa).expect("validated above");
        if args.delay_a {
            Box::new(apply_reaction_delay(p))
        } else {
            p
        }
    };
    let make_b = || make_policy(&args.b, args.maintenance, &pb).expect("validated above");
    let report = play_matches(&arena, make_a, make_b, args.matches, args.seed)?;
    let summary = serde_json::json!({
        "a": args.a,
        "b": args.b,
        "matches": report.matches,
        "wins_a": report.wins_a,
        "wins_b": report.wins_b,
        "draws": report.draws,
        "win_rate_a": report.win_rate_a,
        "ci95": report.ci95,
        "p_value_a_better": report.p_value_better(),
        "mean_ticks": report.mean_ticks,
        "mean_seconds": report.mean_ticks * arena.roster().arena.tick_seconds,
    });
    println!("{summary}");
    let rows: Vec<MatchRow> = report
        .results
        .iter()
        .map(|r| MatchRow {
            seed: r.seed,
            winner: duelist_core::eval::winner_label(r),
            ticks: r.ticks,
            damage_a: r.damage_dealt[0],
            damage_b: r.damage_dealt[1],
        })
        .collect();
    if let Some(p) = &args.jsonl {
        write_jsonl(p, &rows)?;
    }
    if let Some(p) = &args.csv {
        write_csv(p, &rows)?;
    }
    Ok(())
}

fn ablate(args: AblateArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(p) => AblationConfig::from_toml_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => AblationConfig::default(),
    };
    let summary = run_ablation(&Arena::default(), &cfg, args.suite, &args.out)?;
    println!("{summary}");
    Ok(())
}

fn serve_cmd(args: ServeArgs) -> Result<()> {
    let arena = Arena::default();
    let params = load_artifact(&args.checkpoint)?;
    params.shape().check_arena(&arena)?;
    let config = ServerConfig {
        tick_hz: args.tick_hz,
        seed: args.seed,
        record_dir: args.record,
        reaction_delay: !args.no_delay,
        ..ServerConfig::default()
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
        tracing::info!("duel server listening on ws://{}/ws", listener.local_addr()?);
        serve(listener, arena, params, config).await
    })
}

fn dump(args: DumpArgs) -> Result<()> {
    let f = File::open(&args.log).with_context(|| format!("opening {}", args.log.display()))?;
    let episodes = read_episodes(BufReader::new(f))?;
    match args.out {
        Some(p) => dump_text(&episodes, BufWriter::new(File::create(p)?))?,
        None => dump_text(&episodes, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .init();
    match Cli::parse().command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Serve(a) => serve_cmd(a),
        Command::Dump(a) => dump(a),
    }
}
