use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use super::pool::SnapshotMeta;
use crate::arena::Style;
use crate::error::{CheckpointError, PoolError};
use crate::policy::{load_checkpoint, save_checkpoint, NetworkParams};

pub const INDEX_FILE: &str = "index.jsonl";
const WRITE_ATTEMPTS: u32 = 4;
const BACKOFF_BASE: Duration = Duration::from_millis(20);

type Writer = dyn Fn(&Path, &NetworkParams<f32>) -> Result<(), CheckpointError> + Send + Sync;

struct Inner {
    entries: Vec<SnapshotMeta>,
    next_id: u64,
    cache: HashMap<u64, Arc<NetworkParams<f32>>>,
}

/// Append-only snapshot registry backed by a directory of checkpoints and a JSON-lines index.
pub struct SnapshotStore {
    dir: PathBuf,
    inner: Mutex<Inner>,
    writer: Box<Writer>,
}

impl std::fmt::Debug for SnapshotStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SnapshotStore").field("dir", &self.dir).finish_non_exhaustive()
    }
}

fn storage(e: impl std::fmt::Display) -> PoolError {
    PoolError::Storage(e.to_string())
}

impl SnapshotStore {
    /// Open `dir`, creating it if needed and reading any existing index.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, PoolError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(storage)?;
        let mut entries = Vec::new();
        let index = dir.join(INDEX_FILE);
        if index.exists() {
            let f = fs::File::open(&index).map_err(storage)?;
            for line in BufReader::new(f).lines() {
                let line = line.map_err(storage)?;
                if line.trim().is_empty() {
                    continue;
                }
                // A torn final line from a crash is ignored.
                if let Ok(meta) = serde_json::from_str::<SnapshotMeta>(&line) {
                    if dir.join(&meta.file).exists() {
                        entries.push(meta);
                    }
                }
            }
        }
        let next_id = entries.iter().map(|e| e.id + 1).max().unwrap_or(0);
        Ok(SnapshotStore {
            dir,
            inner: Mutex::new(Inner { entries, next_id, cache: HashMap::new() }),
            writer: Box::new(|p, params| save_checkpoint(params, p)),
        })
    }

    /// Replace the checkpoint writer (used to exercise storage failures).
    pub fn with_writer(
        mut self,
        writer: impl Fn(&Path, &NetworkParams<f32>) -> Result<(), CheckpointError> + Send + Sync + 'static,
    ) -> Self {
        self.writer = Box::new(writer);
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn entries(&self) -> Vec<SnapshotMeta> {
        self.lock().entries.clone()
    }

    pub fn latest(&self, style: Style) -> Option<SnapshotMeta> {
        self.lock().entries.iter().rev().find(|e| e.style == style).cloned()
    }

    /// Save `params` and append its record. Failed writes are retried with exponential backoff.
    pub fn register(&self, style: Style, step: u64, ticks: u64, params: &NetworkParams<f32>) -> Result<SnapshotMeta, PoolError> {
        let mut inner = self.lock();
        let id = inner.next_id;
        let file = format!("{}-{id}.ckpt", style.name());
        let path = self.dir.join(&file);
        let mut attempt = 0;
        loop {
            match (self.writer)(&path, params) {
                Ok(()) => break,
                Err(e) if attempt + 1 >= WRITE_ATTEMPTS => return Err(storage(e)),
                Err(_) => {
                    std::thread::sleep(BACKOFF_BASE * 2u32.pow(attempt));
                    attempt += 1;
                }
            }
        }
        let saved_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let meta = SnapshotMeta { id, style, step, ticks, file, saved_at };
        let mut index = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(INDEX_FILE))
            .map_err(storage)?;
        let line = serde_json::to_string(&meta).map_err(storage)?;
        writeln!(index, "{line}").map_err(storage)?;
        index.sync_data().map_err(storage)?;
        inner.next_id += 1;
        inner.entries.push(meta.clone());
        inner.cache.insert(id, Arc::new(params.clone()));
        Ok(meta)
    }

    /// Parameters of a registered snapshot, read from disk on first use.
    pub fn load(&self, meta: &SnapshotMeta) -> Result<Arc<NetworkParams<f32>>, PoolError> {
        if let Some(p) = self.lock().cache.get(&meta.id) {
            return Ok(p.clone());
        }
        let params = Arc::new(load_checkpoint(&self.dir.join(&meta.file))?);
        self.lock().cache.insert(meta.id, params.clone());
        Ok(params)
    }
}

/// Register a snapshot when `step` is a multiple of `every`.
pub fn snapshot_if_due(
    store: &SnapshotStore,
    style: Style,
    step: u64,
    ticks: u64,
    every: u64,
    params: &NetworkParams<f32>,
) -> Result<Option<SnapshotMeta>, PoolError> {
    if every == 0 || step % every != 0 {
        return Ok(None);
    }
    store.register(style, step, ticks, params).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::NetShape;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn params() -> NetworkParams<f32> {
        NetworkParams::init(NetShape { obs_len: 3, hidden: 4, skills: 3, moves: 18 }, 0)
    }

    #[test]
    fn due_only_on_multiples() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::open(dir.path()).unwrap();
        let p = params();
        assert!(snapshot_if_due(&store, Style::Balanced, 20_000, 0, 10_000, &p).unwrap().is_some());
        assert!(snapshot_if_due(&store, Style::Balanced, 10_001, 0, 10_000, &p).unwrap().is_none());
        assert_eq!(store.entries().len(), 1);
    }

    #[test]
    fn concurrent_registration_gets_distinct_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::open(dir.path()).unwrap();
        let p = params();
        std::thread::scope(|s| {
            for style in Style::SHAPED {
                let store = &store;
                let p = &p;
                s.spawn(move || {
                    for step in 0..5 {
                        store.register(style, step, 0, p).unwrap();
                    }
                });
            }
        });
        let mut ids: Vec<u64> = store.entries().iter().map(|e| e.id).collect();
        assert_eq!(ids.len(), 15);
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 15);
        let reopened = SnapshotStore::open(dir.path()).unwrap();
        assert_eq!(reopened.entries().len(), 15);
        let meta = reopened.latest(Style::Defensive).unwrap();
        assert_eq!(*reopened.load(&meta).unwrap(), p);
    }

    #[test]
    fn transient_storage_failure_is_retried() {
        let dir = tempfile::tempdir().unwrap();
        let failures = Arc::new(AtomicU32::new(0));
        let counter = failures.clone();
        let store = SnapshotStore::open(dir.path()).unwrap().with_writer(move |path, params| {
            if counter.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(CheckpointError::Io(std::io::Error::other("disk busy")))
            } else {
                save_checkpoint(params, path)
            }
        });
        let meta = store.register(Style::Aggressive, 0, 0, &params()).unwrap();
        assert_eq!(failures.load(Ordering::SeqCst), 3);
        assert!(dir.path().join(meta.file).exists());
    }

    #[test]
    fn persistent_failure_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::open(dir.path())
            .unwrap()
            .with_writer(|_, _| Err(CheckpointError::Io(std::io::Error::other("read-only"))));
        assert!(matches!(store.register(Style::Aggressive, 0, 0, &params()), Err(PoolError::Storage(_))));
        assert!(store.entries().is_empty());
    }
}
