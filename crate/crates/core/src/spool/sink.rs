//! Delivery targets. Every sink verifies content integrity before the
//! spooler may consider an entry delivered.

use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub const DIGEST_HEADER: &str = "x-content-sha256";

#[derive(Debug, thiserror::Error)]
pub enum SinkError {
    #[error("sink unreachable: {0}")]
    SinkUnreachable(String),
    #[error("checksum mismatch at sink: expected {expected}, got {actual}")]
    ChecksumMismatchAtSink { expected: String, actual: String },
}

pub trait Sink: Send {
    /// Places a byte-identical, checksum-verified copy of `source` at the
    /// sink. Must be idempotent per (basename, checksum).
    fn deliver(&mut self, source: &Path, checksum: &str) -> Result<(), SinkError>;

    fn describe(&self) -> String;
}

/// Sink object name: `<basename>.<first 8 checksum chars>`.
pub fn sink_object_name(source: &Path, checksum: &str) -> String {
    let base = source
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unnamed".into());
    format!("{base}.{}", &checksum[..8.min(checksum.len())])
}

/// Copies into a local directory, verifying the copy by re-reading it.
pub struct DirectorySink {
    pub target: PathBuf,
}

impl DirectorySink {
    pub fn new(target: impl Into<PathBuf>) -> DirectorySink {
        DirectorySink {
            target: target.into(),
        }
    }
}

fn hash_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

impl Sink for DirectorySink {
    fn deliver(&mut self, source: &Path, checksum: &str) -> Result<(), SinkError> {
        let unreachable = |e: std::io::Error| SinkError::SinkUnreachable(e.to_string());
        std::fs::create_dir_all(&self.target).map_err(unreachable)?;
        let dest = self.target.join(sink_object_name(source, checksum));

        if dest.exists() {
            // a byte-identical object is already there: done (retry after a
            // crashed ack, or a restart replaying an in-flight transfer)
            let existing = hash_file(&dest).map_err(unreachable)?;
            if existing == checksum {
                return Ok(());
            }
            // half-written leftover; fall through and rewrite it
        }

        let tmp = self.target.join(format!(
            ".{}.tmp",
            sink_object_name(source, checksum)
        ));
        std::fs::copy(source, &tmp).map_err(unreachable)?;
        let copied = hash_file(&tmp).map_err(unreachable)?;
        if copied != checksum {
            let _ = std::fs::remove_file(&tmp);
            return Err(SinkError::ChecksumMismatchAtSink {
                expected: checksum.to_string(),
                actual: copied,
            });
        }
        std::fs::rename(&tmp, &dest).map_err(unreachable)?;
        Ok(())
    }

    fn describe(&self) -> String {
        format!("directory-copy {}", self.target.display())
    }
}

/// PUTs the bytes with the digest in a request header; a 2xx response that
/// echoes the digest is the acknowledgement.
pub struct HttpSink {
    pub base_url: String,
    agent: ureq::Agent,
}

impl HttpSink {
    pub fn new(base_url: impl Into<String>) -> HttpSink {
        HttpSink {
            base_url: base_url.into(),
            agent: ureq::Agent::new(),
        }
    }
}

impl Sink for HttpSink {
    fn deliver(&mut self, source: &Path, checksum: &str) -> Result<(), SinkError> {
        let body = std::fs::read(source)
            .map_err(|e| SinkError::SinkUnreachable(format!("reading source: {e}")))?;
        let url = format!(
            "{}/{}",
            self.base_url.trim_end_matches('/'),
            sink_object_name(source, checksum)
        );
        let response = self
            .agent
            .put(&url)
            .set(DIGEST_HEADER, checksum)
            .send_bytes(&body)
            .map_err(|e| SinkError::SinkUnreachable(e.to_string()))?;
        let echoed = response.header(DIGEST_HEADER).unwrap_or("");
        if echoed != checksum {
            return Err(SinkError::ChecksumMismatchAtSink {
                expected: checksum.to_string(),
                actual: echoed.to_string(),
            });
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!("http-put {}", self.base_url)
    }
}

impl fmt::Debug for dyn Sink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}
