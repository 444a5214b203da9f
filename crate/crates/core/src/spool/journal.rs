//! Append-only journal of spool entry state transitions. The journal is the
//! durable source of truth: every transition is flushed to disk before it
//! takes effect in memory, and replay reconstructs the entry table after a
//! restart.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{SpoolEntry, SpoolError, SpoolState};

const FORMAT: &str = "edgebench-spool-journal";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JournalRecord {
    Enqueue {
        id: String,
        path: PathBuf,
        size_bytes: u64,
        checksum: String,
        ts: DateTime<Utc>,
    },
    State {
        id: String,
        state: SpoolState,
        attempts: u32,
        ts: DateTime<Utc>,
    },
    SourceDeleted {
        id: String,
        ts: DateTime<Utc>,
    },
}

pub struct Journal {
    writer: BufWriter<File>,
}

impl Journal {
    /// Opens (or creates) the journal and replays its records into an entry
    /// table. InFlight entries resume as Pending: the transfer outcome is
    /// unknown, and the sink-side checksum check makes the retry harmless.
    pub fn open(path: &Path) -> Result<(Journal, BTreeMap<String, SpoolEntry>), SpoolError> {
        let mut entries = BTreeMap::new();
        let fresh = !path.exists();
        if !fresh {
            let text =
                std::fs::read_to_string(path).map_err(SpoolError::JournalWriteFailed)?;
            replay_into(&text, &mut entries)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(SpoolError::JournalWriteFailed)?;
        let mut journal = Journal {
            writer: BufWriter::new(file),
        };
        if fresh {
            let header = Header {
                format: FORMAT.into(),
                version: VERSION,
            };
            journal.append_line(&serde_json::to_string(&header).expect("header serializes"))?;
        }
        Ok((journal, entries))
    }

    fn append_line(&mut self, line: &str) -> Result<(), SpoolError> {
        writeln!(self.writer, "{line}").map_err(SpoolError::JournalWriteFailed)?;
        self.writer.flush().map_err(SpoolError::JournalWriteFailed)?;
        self.writer
            .get_ref()
            .sync_data()
            .map_err(SpoolError::JournalWriteFailed)
    }

    pub fn append(&mut self, record: &JournalRecord) -> Result<(), SpoolError> {
        self.append_line(&serde_json::to_string(record).expect("record serializes"))
    }
}

/// Applies journal text to an entry table. A final unparseable line is
/// tolerated (interrupted append); anything else malformed is corruption.
pub fn replay_into(
    text: &str,
    entries: &mut BTreeMap<String, SpoolEntry>,
) -> Result<(), SpoolError> {
    let lines: Vec<&str> = text.lines().collect();
    let Some((first, rest)) = lines.split_first() else {
        return Ok(());
    };
    let header: Header = serde_json::from_str(first)
        .map_err(|e| SpoolError::JournalCorrupt(format!("header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(SpoolError::JournalCorrupt(format!(
            "unsupported journal {} v{}",
            header.format, header.version
        )));
    }
    for (i, line) in rest.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let record: JournalRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) if i == rest.len() - 1 => {
                log::warn!("journal: dropping interrupted final record ({e})");
                continue;
            }
            Err(e) => {
                return Err(SpoolError::JournalCorrupt(format!("line {}: {e}", i + 2)));
            }
        };
        match record {
            JournalRecord::Enqueue {
                id,
                path,
                size_bytes,
                checksum,
                ts,
            } => {
                entries.entry(id.clone()).or_insert(SpoolEntry {
                    id,
                    source_path: path,
                    size_bytes,
                    checksum,
                    state: SpoolState::Pending,
                    attempts: 0,
                    first_seen: ts,
                    last_attempt: None,
                    next_eligible_mono_ns: 0,
                    acked_at_mono_ns: None,
                    source_deleted: false,
                });
            }
            JournalRecord::State {
                id,
                state,
                attempts,
                ts,
            } => {
                let entry = entries.get_mut(&id).ok_or_else(|| {
                    SpoolError::JournalCorrupt(format!("state for unknown entry {id}"))
                })?;
                // a transfer that was cut off mid-flight is retried
                entry.state = if state == SpoolState::InFlight {
                    SpoolState::Pending
                } else {
                    state
                };
                entry.attempts = attempts;
                entry.last_attempt = Some(ts);
            }
            JournalRecord::SourceDeleted { id, .. } => {
                let entry = entries.get_mut(&id).ok_or_else(|| {
                    SpoolError::JournalCorrupt(format!("deletion of unknown entry {id}"))
                })?;
                entry.source_deleted = true;
            }
        }
    }
    Ok(())
}
