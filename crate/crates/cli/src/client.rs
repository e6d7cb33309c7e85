//! Headless scripted client for the duel server.

use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use futures_util::{SinkExt, StreamExt};
use tokio_tungstenite::connect_async;
use tokio_tungstenite::tungstenite::Message;

use crate::protocol::{ClientInput, MatchRecord, ServerFrame, StateFrame, PROTOCOL_VERSION};

/// What a scripted client observed over one match.
#[derive(Debug, Clone)]
pub struct ClientSession {
    pub match_id: String,
    pub seed: u64,
    pub states: Vec<StateFrame>,
    /// Arrival time of every state frame, relative to the first.
    pub arrivals: Vec<Duration>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
    pub record: Option<MatchRecord>,
}

impl ClientSession {
    /// Mean state-frame rate over the session, in Hz.
    pub fn frame_rate(&self) -> f64 {
        match (self.arrivals.first(), self.arrivals.last()) {
            (Some(a), Some(b)) if self.arrivals.len() > 1 => (self.arrivals.len() - 1) as f64 / (*b - *a).as_secs_f64(),
            _ => 0.0,
        }
    }
}

/// Play one match. `choose` maps each state frame to `(skill, move)` or `None` to stay silent.
/// Stops after `max_frames` state frames if given, closing the connection early.
pub async fn play(
    url: &str,
    mut choose: impl FnMut(&StateFrame) -> Option<(usize, usize)>,
    max_frames: Option<usize>,
) -> anyhow::Result<ClientSession> {
    let (ws, _) = connect_async(url).await.with_context(|| format!("connecting to {url}"))?;
    let (mut sink, mut stream) = ws.split();
    let mut session = ClientSession {
        match_id: String::new(),
        seed: 0,
        states: Vec::new(),
        arrivals: Vec::new(),
        warnings: Vec::new(),
        errors: Vec::new(),
        record: None,
    };
    let start = Instant::now();
    while let Some(msg) = stream.next().await {
        let text = match msg? {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let frame: ServerFrame = serde_json::from_str(&text).context("decoding server frame")?;
        match frame {
            ServerFrame::Hello { v, match_id, seed, .. } => {
                if v != PROTOCOL_VERSION {
                    bail!("server speaks protocol {v}");
                }
                session.match_id = match_id;
                session.seed = seed;
            }
            ServerFrame::State(state) => {
                session.arrivals.push(start.elapsed());
                if let Some((skill, mv)) = choose(&state) {
                    let input = ClientInput { v: PROTOCOL_VERSION, match_id: session.match_id.clone(), tick: state.tick, skill, mv };
                    sink.send(Message::Text(serde_json::to_string(&input)?.into())).await?;
                }
                session.states.push(state);
                if max_frames.is_some_and(|m| session.states.len() >= m) {
                    sink.close().await?;
                    break;
                }
            }
            ServerFrame::Warning { message, .. } => session.warnings.push(message),
            ServerFrame::Error { message, .. } => session.errors.push(message),
            ServerFrame::End { record, .. } => {
                session.record = Some(record);
                break;
            }
        }
    }
    Ok(session)
}

/// Send a raw text message and return the first error frame the server answers with.
pub async fn send_raw_and_expect_error(url: &str, text: &str) -> anyhow::Result<String> {
    let (ws, _) = connect_async(url).await?;
    let (mut sink, mut stream) = ws.split();
    sink.send(Message::Text(text.to_string().into())).await?;
    while let Some(msg) = stream.next().await {
        if let Message::Text(t) = msg? {
            if let ServerFrame::Error { message, .. } = serde_json::from_str(&t)? {
                sink.close().await?;
                return Ok(message);
            }
        }
    }
    bail!("connection closed without an error frame")
}
