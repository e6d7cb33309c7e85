//! Authoritative live-match server: one fixed-rate loop per connected client.

use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use duelist_core::arena::{Arena, ArenaState, JointAction, Outcome, Side, Style, GAMMA, MOVE_ACTIONS};
use duelist_core::eval::{apply_reaction_delay, match_seed, NetPolicy, Policy};
use duelist_core::pipeline::{filter_episode, EpisodeLog, EpisodeWriter, OpponentRef, RawTick};
use duelist_core::policy::NetworkParams;
use futures_util::{SinkExt, StreamExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tokio::time::MissedTickBehavior;

use crate::protocol::{parse_input, ClientInput, MatchRecord, ServerFrame, StateFrame, PROTOCOL_VERSION};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub tick_hz: f64,
    /// Base seed; match `n` uses a seed derived from it. `None` seeds from the clock.
    pub seed: Option<u64>,
    /// Directory receiving `{match_id}.json` records and `{match_id}.log` episode logs.
    pub record_dir: Option<PathBuf>,
    pub reaction_delay: bool,
    pub maintenance: u32,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { tick_hz: 10.0, seed: None, record_dir: None, reaction_delay: true, maintenance: 10 }
    }
}

#[derive(Clone)]
struct AppState {
    arena: Arc<Arena>,
    agent: Arc<NetworkParams<f32>>,
    config: Arc<ServerConfig>,
    matches: Arc<AtomicU64>,
}

pub fn router(arena: Arena, agent: Arc<NetworkParams<f32>>, config: ServerConfig) -> Router {
    let state = AppState { arena: Arc::new(arena), agent, config: Arc::new(config), matches: Arc::new(AtomicU64::new(0)) };
    Router::new().route("/ws", get(upgrade)).with_state(state)
}

pub async fn serve(listener: TcpListener, arena: Arena, agent: Arc<NetworkParams<f32>>, config: ServerConfig) -> anyhow::Result<()> {
    axum::serve(listener, router(arena, agent, config)).await?;
    Ok(())
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_match(socket, state))
}

fn clock_seed() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64)
}

fn state_frame(arena: &Arena, match_id: &str, state: &ArenaState, events: Vec<duelist_core::arena::ArenaEvent>) -> ServerFrame {
    let human = state.player(Side::Opponent);
    ServerFrame::State(StateFrame {
        v: PROTOCOL_VERSION,
        match_id: match_id.to_string(),
        tick: state.tick,
        human: human.clone(),
        agent: state.player(Side::Agent).clone(),
        mask: arena.available_skills(state, Side::Opponent).to_bools(),
        cooldowns: human.cooldowns.clone(),
        events,
        outcome: state.outcome,
    })
}

/// Check a human input against the rules; returns the action to apply and a warning if it was altered.
pub fn sanitize_input(arena: &Arena, state: &ArenaState, input: Option<&ClientInput>) -> (JointAction, Option<String>) {
    let Some(i) = input else {
        return (JointAction::IDLE, None);
    };
    if i.skill >= arena.num_skills() || i.mv >= MOVE_ACTIONS {
        return (JointAction::IDLE, Some(format!("action out of range: skill {}, move {}", i.skill, i.mv)));
    }
    if !arena.available_skills(state, Side::Opponent).get(i.skill) {
        return (JointAction::new(0, i.mv), Some(format!("skill {} is unavailable; no-op substituted", i.skill)));
    }
    (JointAction::new(i.skill, i.mv), None)
}

async fn run_match(socket: WebSocket, app: AppState) {
    let n = app.matches.fetch_add(1, Ordering::SeqCst);
    let seed = app.config.seed.map_or_else(clock_seed, |s| match_seed(s, n));
    let match_id = format!("m{n:04}-{seed:016x}");
    let arena = &app.arena;

    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    let pending: Arc<Mutex<Option<ClientInput>>> = Arc::new(Mutex::new(None));
    let gone = Arc::new(AtomicBool::new(false));
    let reader = {
        let (pending, gone, tx, id) = (pending.clone(), gone.clone(), tx.clone(), match_id.clone());
        tokio::spawn(async move {
            while let Some(msg) = stream.next().await {
                match msg {
                    Ok(Message::Text(text)) => match parse_input(&text) {
                        Ok(input) if input.match_id == id => *pending.lock().expect("input slot") = Some(input),
                        Ok(input) => {
                            let message = format!("unknown match id {}", input.match_id);
                            let _ = tx.send(ServerFrame::Error { v: PROTOCOL_VERSION, message }.to_json());
                        }
                        Err(message) => {
                            let _ = tx.send(ServerFrame::Error { v: PROTOCOL_VERSION, message }.to_json());
                        }
                    },
                    Ok(Message::Close(_)) | Err(_) => break,
                    Ok(_) => {}
                }
            }
            gone.store(true, Ordering::SeqCst);
        })
    };

    let skills = (0..arena.num_skills()).map(|i| arena.roster().skill(i).name.clone()).collect();
    let hello = ServerFrame::Hello {
        v: PROTOCOL_VERSION,
        match_id: match_id.clone(),
        seed,
        tick_hz: app.config.tick_hz,
        max_ticks: arena.max_ticks(),
        skills,
        moves: MOVE_ACTIONS,
    };
    let _ = tx.send(hello.to_json());

    let net = NetPolicy::new(app.agent.clone()).with_maintenance(app.config.maintenance).with_label("agent");
    let mut agent: Box<dyn Policy> = if app.config.reaction_delay { Box::new(apply_reaction_delay(net)) } else { Box::new(net) };
    agent.reset();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = arena.reset(seed);
    let mut actions = Vec::new();
    let mut raw = Vec::new();
    let mut rejected = 0;
    let mut aborted = false;
    let reward = Style::Baseline.config();
    let _ = tx.send(state_frame(arena, &match_id, &state, Vec::new()).to_json());

    let mut clock = tokio::time::interval(Duration::from_secs_f64(1.0 / app.config.tick_hz));
    clock.set_missed_tick_behavior(MissedTickBehavior::Delay);
    clock.tick().await;
    while !state.done {
        clock.tick().await;
        if gone.load(Ordering::SeqCst) {
            aborted = true;
            break;
        }
        let input = pending.lock().expect("input slot").take();
        let (human, warning) = sanitize_input(arena, &state, input.as_ref());
        if let Some(message) = warning {
            rejected += 1;
            let _ = tx.send(ServerFrame::Warning { v: PROTOCOL_VERSION, tick: state.tick, message }.to_json());
        }
        let decision = match agent.act(arena, &state, Side::Agent, &mut rng) {
            Ok(d) => d,
            Err(e) => {
                tracing::error!(%match_id, "agent failed: {e}");
                aborted = true;
                break;
            }
        };
        let step = match arena.step(&state, decision.action, human) {
            Ok(s) => s,
            Err(e) => {
                tracing::error!(%match_id, "step rejected: {e}");
                aborted = true;
                break;
            }
        };
        raw.push(agent_tick(arena, &state, &step.state, decision, &reward));
        actions.push([raw.last().expect("pushed").action, human]);
        state = step.state;
        let _ = tx.send(state_frame(arena, &match_id, &state, step.events).to_json());
    }

    let record = MatchRecord {
        match_id: match_id.clone(),
        seed,
        outcome: if aborted { Outcome::Ongoing } else { state.outcome },
        ticks: state.tick,
        actions,
        aborted,
        rejected_inputs: rejected,
    };
    if aborted {
        tracing::warn!(%match_id, tick = state.tick, "match aborted");
    } else {
        tracing::info!(%match_id, outcome = ?state.outcome, ticks = state.tick, "match finished");
    }
    if let Some(dir) = &app.config.record_dir {
        if let Err(e) = save_record(dir, &record, &raw, state.outcome) {
            tracing::error!(%match_id, "could not save match record: {e}");
        }
    }
    if !aborted {
        let end = ServerFrame::End { v: PROTOCOL_VERSION, match_id, outcome: state.outcome, ticks: state.tick, record };
        let _ = tx.send(end.to_json());
    }
    drop(tx);
    reader.abort();
    let _ = writer.await;
}

fn agent_tick(
    arena: &Arena,
    prev: &ArenaState,
    next: &ArenaState,
    decision: duelist_core::eval::Decision,
    reward: &duelist_core::arena::StyleConfig,
) -> RawTick {
    let r = duelist_core::arena::style_reward(prev, next, reward);
    match decision.record {
        Some(rec) => RawTick {
            tick: prev.tick,
            obs: rec.obs,
            mask: rec.mask,
            action: decision.action,
            behavior_skill: rec.behavior_skill,
            behavior_move: rec.behavior_move,
            reward: r,
            move_phase: rec.move_phase,
        },
        // A held tick under the reaction delay: the applied action was fixed in advance.
        None => {
            let mask = arena.available_skills(prev, Side::Agent);
            let mut behavior_skill = vec![0.0; mask.len()];
            behavior_skill[decision.action.skill] = 1.0;
            RawTick {
                tick: prev.tick,
                obs: arena.observe(prev, Side::Agent),
                mask,
                action: decision.action,
                behavior_skill,
                behavior_move: None,
                reward: r,
                move_phase: 1,
            }
        }
    }
}

fn save_record(dir: &std::path::Path, record: &MatchRecord, raw: &[RawTick], outcome: Outcome) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{}.json", record.match_id)), serde_json::to_vec_pretty(record)?)?;
    if let Ok(filtered) = filter_episode(raw, GAMMA, true) {
        let log = EpisodeLog {
            style: Style::Baseline,
            agent_version: 0,
            opponent: OpponentRef::Human,
            outcome,
            ticks: record.ticks,
            leading_return: filtered.leading_return,
            transitions: filtered.transitions,
        };
        let mut w = EpisodeWriter::new(fs::File::create(dir.join(format!("{}.log", record.match_id)))?)?;
        w.write(&log)?;
        w.finish()?;
    }
    Ok(())
}
