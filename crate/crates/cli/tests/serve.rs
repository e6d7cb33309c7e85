use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use duelist_cli::client::{play, send_raw_and_expect_error};
use duelist_cli::protocol::MatchRecord;
use duelist_cli::server::{serve, ServerConfig};
use duelist_core::arena::{Arena, Outcome};
use duelist_core::eval::replay_trace;
use duelist_core::pipeline::{read_episodes, OpponentRef};
use duelist_core::policy::{NetShape, NetworkParams};

async fn start(tick_hz: f64, record_dir: Option<PathBuf>) -> String {
    let arena = Arena::default();
    let params = Arc::new(NetworkParams::init(NetShape::for_arena(&arena, 16), 5));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let config = ServerConfig { tick_hz, seed: Some(42), record_dir, ..ServerConfig::default() };
    tokio::spawn(serve(listener, arena, params, config));
    format!("ws://{addr}/ws")
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn scripted_client_completes_a_match_that_replays_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let url = start(1000.0, Some(dir.path().to_path_buf())).await;
    let mut probed_unavailable = false;
    let session = play(
        &url,
        |frame| {
            if !probed_unavailable {
                if let Some(bad) = frame.mask.iter().position(|&ok| !ok) {
                    probed_unavailable = true;
                    return Some((bad, 8));
                }
            }
            let skill = [1, 2, 4].into_iter().find(|&s| frame.mask[s]).unwrap_or(0);
            Some((skill, (frame.tick as usize / 7) % 18))
        },
        None,
    )
    .await
    .unwrap();

    let record = session.record.expect("match ran to the end");
    assert!(!record.aborted);
    assert_ne!(record.outcome, Outcome::Ongoing);
    assert_eq!(record.actions.len() as u32, record.ticks);
    assert_eq!(session.states.last().unwrap().outcome, record.outcome);
    assert!(session.errors.is_empty(), "{:?}", session.errors);

    assert!(probed_unavailable);
    assert!(record.rejected_inputs >= 1);
    assert!(session.warnings.iter().any(|w| w.contains("unavailable")), "{:?}", session.warnings);

    let arena = Arena::default();
    assert_eq!(replay_trace(&arena, record.seed, &record.actions).unwrap(), (record.outcome, record.ticks));

    let saved: MatchRecord = serde_json::from_slice(&std::fs::read(dir.path().join(format!("{}.json", record.match_id))).unwrap()).unwrap();
    assert_eq!(saved, record);
    let log = std::fs::File::open(dir.path().join(format!("{}.log", record.match_id))).unwrap();
    let episodes = read_episodes(std::io::BufReader::new(log)).unwrap();
    assert_eq!(episodes.len(), 1);
    assert_eq!(episodes[0].opponent, OpponentRef::Human);
    assert_eq!(episodes[0].outcome, record.outcome);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn frames_arrive_at_ten_hertz() {
    let url = start(10.0, None).await;
    let session = play(&url, |_| None, Some(31)).await.unwrap();
    let hz = session.frame_rate();
    assert!((9.0..=11.0).contains(&hz), "frame rate {hz:.2} Hz");
    for frame in &session.states {
        assert_eq!(frame.v, 1);
        assert_eq!(frame.mask.len(), frame.cooldowns.len());
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn malformed_messages_get_an_error_frame() {
    let url = start(20.0, None).await;
    let message = send_raw_and_expect_error(&url, "{\"v\":1,\"tick\":\"soon\"}").await.unwrap();
    assert!(message.contains("malformed"), "{message}");
    let message = send_raw_and_expect_error(&url, r#"{"v":1,"match_id":"nope","tick":0,"skill":0,"move":0}"#).await.unwrap();
    assert!(message.contains("unknown match id"), "{message}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn disconnect_aborts_and_logs_the_match() {
    let dir = tempfile::tempdir().unwrap();
    let url = start(200.0, Some(dir.path().to_path_buf())).await;
    let session = play(&url, |_| None, Some(5)).await.unwrap();
    let path = dir.path().join(format!("{}.json", session.match_id));
    for _ in 0..100 {
        if path.exists() {
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    let record: MatchRecord = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert!(record.aborted);
    assert_eq!(record.outcome, Outcome::Ongoing);
    assert!(record.ticks >= 4);
}
