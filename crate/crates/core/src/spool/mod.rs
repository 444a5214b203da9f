//! Store-and-forward spool: watches an inbox for completed files, journals
//! integrity checksums, and delivers to a sink with retry and checksum
//! dedup. At-least-once delivery plus sink-side idempotence gives effective
//! exactly-once; sources are never lost — a file either reaches Acked or
//! stays on disk in Failed.

mod journal;
mod sink;

pub use journal::{Journal, JournalRecord};
pub use sink::{sink_object_name, DirectorySink, HttpSink, Sink, SinkError, DIGEST_HEADER};

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, SystemTime};

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clock::mono_now_ns;

#[derive(Debug, Error)]
pub enum SpoolError {
    #[error("inbox unreadable: {0}")]
    DirUnreadable(std::io::Error),
    #[error("cannot read {path}: {source}")]
    ReadFailed {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("journal write failed: {0}")]
    JournalWriteFailed(std::io::Error),
    #[error("journal corrupt: {0}")]
    JournalCorrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpoolState {
    Pending,
    InFlight,
    Acked,
    Failed,
}

/// One file's journey through the spool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpoolEntry {
    /// Digest of (path, checksum): the dedup key.
    pub id: String,
    pub source_path: PathBuf,
    pub size_bytes: u64,
    pub checksum: String,
    pub state: SpoolState,
    pub attempts: u32,
    pub first_seen: DateTime<Utc>,
    pub last_attempt: Option<DateTime<Utc>>,
    /// Monotonic instant before which a retry must not run.
    #[serde(skip)]
    pub next_eligible_mono_ns: u64,
    #[serde(skip)]
    pub acked_at_mono_ns: Option<u64>,
    pub source_deleted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryConfig {
    pub max_attempts: u32,
    /// First retry delay; doubles (times `multiplier`) per failure.
    pub base_backoff: Duration,
    pub multiplier: f64,
    /// Symmetric fraction of the delay added or removed at random.
    pub jitter: f64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        RetryConfig {
            max_attempts: 8,
            base_backoff: Duration::from_secs(2),
            multiplier: 2.0,
            jitter: 0.1,
        }
    }
}

impl RetryConfig {
    /// Delay before the next attempt, `failures` being the count so far.
    fn backoff_ns(&self, failures: u32) -> u64 {
        let exp = self.multiplier.powi(failures.saturating_sub(1) as i32);
        let base = self.base_backoff.as_nanos() as f64 * exp;
        let jitter = if self.jitter > 0.0 {
            rand::rng().random_range(-self.jitter..=self.jitter)
        } else {
            0.0
        };
        (base * (1.0 + jitter)).max(0.0) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SinkKind {
    #[serde(rename = "directory-copy")]
    DirectoryCopy,
    #[serde(rename = "http-put")]
    HttpPut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkConfig {
    pub kind: SinkKind,
    /// Directory path or URL prefix, depending on `kind`.
    pub target: String,
    pub retry: RetryConfig,
    /// How long an Acked source stays in the inbox before deletion.
    pub retain_after_ack: Duration,
}

impl SinkConfig {
    pub fn directory(target: impl Into<String>) -> SinkConfig {
        SinkConfig {
            kind: SinkKind::DirectoryCopy,
            target: target.into(),
            retry: RetryConfig::default(),
            retain_after_ack: Duration::ZERO,
        }
    }

    pub fn build(&self) -> Box<dyn Sink> {
        match self.kind {
            SinkKind::DirectoryCopy => Box::new(DirectorySink::new(&self.target)),
            SinkKind::HttpPut => Box::new(HttpSink::new(&self.target)),
        }
    }
}

const TEMP_SUFFIXES: &[&str] = &[".tmp", ".part", ".partial", "~"];

fn is_temp_name(name: &str) -> bool {
    name.starts_with('.') || TEMP_SUFFIXES.iter().any(|s| name.ends_with(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FileSig {
    size: u64,
    mtime: SystemTime,
}

/// Watches one directory for files that have stopped changing. A file
/// becomes a candidate when its size and mtime survive two looks separated
/// by the stability interval; it is reported once per (signature).
pub struct InboxScanner {
    dir: PathBuf,
    stability_interval: Duration,
    seen: HashMap<PathBuf, (FileSig, u64, bool)>, // sig, first seen mono ns, reported
}

impl InboxScanner {
    pub fn new(dir: impl Into<PathBuf>, stability_interval: Duration) -> InboxScanner {
        InboxScanner {
            dir: dir.into(),
            stability_interval,
            seen: HashMap::new(),
        }
    }

    /// One pass over the inbox; returns newly stable candidate paths.
    pub fn scan(&mut self) -> Result<Vec<PathBuf>, SpoolError> {
        let now = mono_now_ns();
        let mut present = Vec::new();
        let entries = std::fs::read_dir(&self.dir).map_err(SpoolError::DirUnreadable)?;
        let mut candidates = Vec::new();
        for entry in entries {
            let entry = entry.map_err(SpoolError::DirUnreadable)?;
            let path = entry.path();
            let name = entry.file_name().to_string_lossy().into_owned();
            if is_temp_name(&name) {
                continue;
            }
            let Ok(meta) = entry.metadata() else { continue };
            if !meta.is_file() {
                continue;
            }
            let sig = FileSig {
                size: meta.len(),
                mtime: meta.modified().unwrap_or(SystemTime::UNIX_EPOCH),
            };
            present.push(path.clone());
            match self.seen.get_mut(&path) {
                Some((known, since, reported)) => {
                    if *known != sig {
                        // still growing or rewritten: restart the clock
                        *known = sig;
                        *since = now;
                        *reported = false;
                    } else if !*reported
                        && now - *since >= self.stability_interval.as_nanos() as u64
                    {
                        *reported = true;
                        candidates.push(path);
                    }
                }
                None => {
                    self.seen.insert(path, (sig, now, false));
                }
            }
        }
        self.seen.retain(|path, _| present.contains(path));
        Ok(candidates)
    }
}

fn entry_id(path: &Path, checksum: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(path.to_string_lossy().as_bytes());
    hasher.update([0]);
    hasher.update(checksum.as_bytes());
    hex::encode(&hasher.finalize()[..8])
}

/// Counters reported when a spooler run stops.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpoolSummary {
    pub candidates_seen: u64,
    pub enqueued: u64,
    pub forward_attempts: u64,
    pub acked: u64,
    pub failed: u64,
    pub sources_deleted: u64,
}

pub struct SpoolerConfig {
    pub inbox: PathBuf,
    pub journal_path: PathBuf,
    pub sink: SinkConfig,
    pub scan_interval: Duration,
    pub stability_interval: Duration,
}

impl SpoolerConfig {
    pub fn new(inbox: impl Into<PathBuf>, journal_path: impl Into<PathBuf>, sink: SinkConfig) -> SpoolerConfig {
        SpoolerConfig {
            inbox: inbox.into(),
            journal_path: journal_path.into(),
            sink,
            scan_interval: Duration::from_secs(10),
            stability_interval: Duration::from_secs(2),
        }
    }
}

/// The store-and-forward daemon: scan, enqueue, forward, retire.
pub struct Spooler {
    config: SpoolerConfig,
    scanner: InboxScanner,
    sink: Box<dyn Sink>,
    journal: Journal,
    entries: BTreeMap<String, SpoolEntry>,
    summary: SpoolSummary,
}

impl Spooler {
    /// Opens the journal (replaying any previous life) and the sink.
    pub fn open(config: SpoolerConfig) -> Result<Spooler, SpoolError> {
        let sink = config.sink.build();
        Spooler::with_sink(config, sink)
    }

    /// Like [`Spooler::open`] but with a caller-provided sink (fault
    /// injection in tests, custom transports).
    pub fn with_sink(config: SpoolerConfig, sink: Box<dyn Sink>) -> Result<Spooler, SpoolError> {
        let (journal, entries) = Journal::open(&config.journal_path)?;
        let scanner = InboxScanner::new(&config.inbox, config.stability_interval);
        Ok(Spooler {
            scanner,
            sink,
            journal,
            entries,
            summary: SpoolSummary::default(),
            config,
        })
    }

    pub fn entries(&self) -> &BTreeMap<String, SpoolEntry> {
        &self.entries
    }

    pub fn summary(&self) -> SpoolSummary {
        self.summary
    }

    /// Computes the checksum, journals the entry, and takes ownership of the
    /// file. Re-enqueueing the same (path, checksum) is a no-op.
    pub fn enqueue(&mut self, path: &Path) -> Result<&SpoolEntry, SpoolError> {
        let bytes = std::fs::read(path).map_err(|source| SpoolError::ReadFailed {
            path: path.to_path_buf(),
            source,
        })?;
        let checksum = hex::encode(Sha256::digest(&bytes));
        let id = entry_id(path, &checksum);
        if self.entries.contains_key(&id) {
            return Ok(&self.entries[&id]);
        }
        let entry = SpoolEntry {
            id: id.clone(),
            source_path: path.to_path_buf(),
            size_bytes: bytes.len() as u64,
            checksum: checksum.clone(),
            state: SpoolState::Pending,
            attempts: 0,
            first_seen: Utc::now(),
            last_attempt: None,
            next_eligible_mono_ns: 0,
            acked_at_mono_ns: None,
            source_deleted: false,
        };
        // journal before owning: a failed append leaves the file a candidate
        self.journal.append(&JournalRecord::Enqueue {
            id: id.clone(),
            path: path.to_path_buf(),
            size_bytes: entry.size_bytes,
            checksum,
            ts: entry.first_seen,
        })?;
        self.summary.enqueued += 1;
        Ok(self.entries.entry(id).or_insert(entry))
    }

    fn journal_state(&mut self, id: &str, state: SpoolState, attempts: u32) -> Result<(), SpoolError> {
        self.journal.append(&JournalRecord::State {
            id: id.to_string(),
            state,
            attempts,
            ts: Utc::now(),
        })
    }

    /// One delivery attempt for a Pending entry. Success acks; failure
    /// schedules a retry or, at the attempt cap, parks the entry as Failed
    /// with its source intact.
    pub fn forward(&mut self, id: &str) -> Result<SpoolState, SpoolError> {
        let (source_path, checksum, attempts_before) = {
            let entry = &self.entries[id];
            debug_assert_eq!(entry.state, SpoolState::Pending);
            (entry.source_path.clone(), entry.checksum.clone(), entry.attempts)
        };
        self.journal_state(id, SpoolState::InFlight, attempts_before)?;
        self.entries.get_mut(id).unwrap().state = SpoolState::InFlight;

        self.summary.forward_attempts += 1;
        let outcome = self.sink.deliver(&source_path, &checksum);
        let attempts = attempts_before + 1;
        let retry = &self.config.sink.retry;
        let state = match &outcome {
            Ok(()) => SpoolState::Acked,
            Err(e) => {
                log::warn!("forward {id} attempt {attempts}: {e}");
                if attempts >= retry.max_attempts {
                    SpoolState::Failed
                } else {
                    SpoolState::Pending
                }
            }
        };
        let backoff = retry.backoff_ns(attempts);
        self.journal_state(id, state, attempts)?;
        let entry = self.entries.get_mut(id).unwrap();
        entry.attempts = attempts;
        entry.last_attempt = Some(Utc::now());
        entry.state = state;
        match state {
            SpoolState::Acked => {
                entry.acked_at_mono_ns = Some(mono_now_ns());
                self.summary.acked += 1;
            }
            SpoolState::Failed => self.summary.failed += 1,
            SpoolState::Pending => entry.next_eligible_mono_ns = mono_now_ns() + backoff,
            SpoolState::InFlight => unreachable!(),
        }
        Ok(state)
    }

    /// One full pass: pick up stable files, push eligible entries, delete
    /// acked sources past retention. Returns true when any work was done or
    /// remains scheduled.
    pub fn tick(&mut self) -> Result<bool, SpoolError> {
        let mut busy = false;

        for path in self.scanner.scan()? {
            self.summary.candidates_seen += 1;
            match self.enqueue(&path) {
                Ok(_) => busy = true,
                Err(SpoolError::ReadFailed { path, source }) => {
                    log::warn!("skipping {}: {source}", path.display());
                }
                Err(e) => return Err(e),
            }
        }

        let now = mono_now_ns();
        let due: Vec<String> = self
            .entries
            .values()
            .filter(|e| e.state == SpoolState::Pending && e.next_eligible_mono_ns <= now)
            .map(|e| e.id.clone())
            .collect();
        for id in due {
            self.forward(&id)?;
            busy = true;
        }

        let retain_ns = self.config.sink.retain_after_ack.as_nanos() as u64;
        let now = mono_now_ns();
        let retire: Vec<String> = self
            .entries
            .values()
            .filter(|e| {
                e.state == SpoolState::Acked
                    && !e.source_deleted
                    && e.acked_at_mono_ns.is_some_and(|t| now - t >= retain_ns)
            })
            .map(|e| e.id.clone())
            .collect();
        for id in retire {
            let path = self.entries[&id].source_path.clone();
            match std::fs::remove_file(&path) {
                Ok(()) | Err(_) if !path.exists() => {
                    self.journal.append(&JournalRecord::SourceDeleted {
                        id: id.clone(),
                        ts: Utc::now(),
                    })?;
                    self.entries.get_mut(&id).unwrap().source_deleted = true;
                    self.summary.sources_deleted += 1;
                    busy = true;
                }
                _ => log::warn!("could not delete acked source {}", path.display()),
            }
        }

        // pending entries waiting on backoff still count as outstanding work
        if self
            .entries
            .values()
            .any(|e| matches!(e.state, SpoolState::Pending | SpoolState::InFlight))
        {
            busy = true;
        }
        Ok(busy)
    }

    /// Scan-and-forward until the stop flag rises; returns summary counts.
    pub fn run(&mut self, stop: &AtomicBool) -> Result<SpoolSummary, SpoolError> {
        while !stop.load(Ordering::SeqCst) {
            self.tick()?;
            let interval = self.config.scan_interval;
            let waited_from = std::time::Instant::now();
            while waited_from.elapsed() < interval && !stop.load(Ordering::SeqCst) {
                std::thread::sleep(Duration::from_millis(25).min(interval));
            }
        }
        Ok(self.summary)
    }

    /// Ticks until nothing is pending and a settle scan finds no new files.
    /// Test and one-shot (`--drain`) mode.
    pub fn drain(&mut self) -> Result<SpoolSummary, SpoolError> {
        let mut settle_scans = 0;
        loop {
            let busy = self.tick()?;
            if busy {
                settle_scans = 0;
            } else {
                settle_scans += 1;
                // two quiet passes one stability interval apart prove the
                // inbox has no file still waiting to become stable
                if settle_scans >= 2 {
                    return Ok(self.summary);
                }
            }
            std::thread::sleep(self.config.stability_interval.min(Duration::from_millis(200)));
        }
    }
}
