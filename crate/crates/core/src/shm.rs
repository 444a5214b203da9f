//! Edge analytics over sensor files: per-channel windowed RMS, a trailing
//! z-score detector with contamination exclusion, and per-file reports
//! ready for forwarding.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::stats::RunningStats;
use crate::tdms::{self, TdmsError, TdmsValue};

#[derive(Debug, Error)]
pub enum ShmError {
    #[error("empty series")]
    EmptySeries,
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error("file has no numeric channels")]
    NoNumericChannels,
    #[error(transparent)]
    Tdms(#[from] TdmsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("state file: {0}")]
    State(String),
    #[error("bad record at line {line}: {msg}")]
    BadRecord { line: usize, msg: String },
}

/// Root mean square: sqrt of the mean of squares.
pub fn rms(series: &[f64]) -> Result<f64, ShmError> {
    if series.is_empty() {
        return Err(ShmError::EmptySeries);
    }
    let sum_sq: f64 = series.iter().map(|x| x * x).sum();
    Ok((sum_sq / series.len() as f64).sqrt())
}

/// One window's RMS for one channel. A trailing partial window is emitted
/// with its true (shorter) `window_len` rather than dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsPoint {
    pub channel_id: String,
    pub window_start: DateTime<Utc>,
    pub window_len: usize,
    pub rms: f64,
}

/// Consecutive non-overlapping windows over a sample series. Window k starts
/// at `t0 + k * window_len * dt_seconds`.
pub fn windowed_rms(
    series: &[f64],
    window_len: usize,
    channel_id: &str,
    t0: DateTime<Utc>,
    dt_seconds: f64,
) -> Result<Vec<RmsPoint>, ShmError> {
    if window_len == 0 {
        return Err(ShmError::ZeroWindow);
    }
    if series.is_empty() {
        return Err(ShmError::EmptySeries);
    }
    let mut points = Vec::with_capacity(series.len() / window_len + 1);
    for (k, chunk) in series.chunks(window_len).enumerate() {
        let offset_ns = (k as f64 * window_len as f64 * dt_seconds * 1e9).round() as i64;
        points.push(RmsPoint {
            channel_id: channel_id.to_string(),
            window_start: t0 + Duration::nanoseconds(offset_ns),
            window_len: chunk.len(),
            rms: rms(chunk)?,
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Number of prior points the baseline may look back over (W).
    pub trailing_window: usize,
    pub z_threshold: f64,
    /// Points required before any event may fire.
    pub min_history: usize,
    /// Suppress events whose absolute deviation is below this, if set.
    pub absolute_floor: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            trailing_window: 96,
            z_threshold: 3.0,
            min_history: 20,
            absolute_floor: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), ShmError> {
        if self.min_history < 2 {
            return Err(ShmError::InvalidConfig("min_history must be at least 2".into()));
        }
        if self.trailing_window < self.min_history {
            return Err(ShmError::InvalidConfig(format!(
                "trailing_window {} is smaller than min_history {}",
                self.trailing_window, self.min_history
            )));
        }
        if !(self.z_threshold > 0.0) {
            return Err(ShmError::InvalidConfig("z_threshold must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Higher,
    Lower,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Higher => "higher",
            Direction::Lower => "lower",
        })
    }
}

/// A flagged deviation of an RMS value from its rolling baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub channel_id: String,
    pub at: DateTime<Utc>,
    pub observed: f64,
    /// Trailing mean at the time of the observation.
    pub expected: f64,
    /// Signed z-value of the observation against the baseline.
    pub score: f64,
    pub direction: Direction,
}

/// Per-channel rolling baseline: the last W non-flagged RMS points. Flagged
/// points never enter the ring, so one extreme value cannot drag the
/// expectation for its successors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelBaseline {
    ring: Vec<RmsPoint>,
}

impl ChannelBaseline {
    fn observe(&mut self, point: &RmsPoint, cfg: &DetectorConfig) -> Option<AnomalyEvent> {
        let mut event = None;
        if self.ring.len() >= cfg.min_history {
            let stats: RunningStats = self.ring.iter().map(|p| p.rms).collect();
            let expected = stats.mean();
            let sigma = stats.sample_std();
            let deviation = point.rms - expected;
            let above_floor = cfg.absolute_floor.is_none_or(|f| deviation.abs() >= f);
            if sigma > 0.0 && (deviation.abs() / sigma) >= cfg.z_threshold && above_floor {
                event = Some(AnomalyEvent {
                    channel_id: point.channel_id.clone(),
                    at: point.window_start,
                    observed: point.rms,
                    expected,
                    score: deviation / sigma,
                    direction: if deviation >= 0.0 {
                        Direction::Higher
                    } else {
                        Direction::Lower
                    },
                });
            }
        }
        if event.is_none() {
            self.ring.push(point.clone());
            if self.ring.len() > cfg.trailing_window {
                let excess = self.ring.len() - cfg.trailing_window;
                self.ring.drain(..excess);
            }
        }
        event
    }
}

/// Runs the detector over one channel's time-ordered points with a fresh
/// baseline. Insufficient history yields no events.
pub fn detect(points: &[RmsPoint], cfg: &DetectorConfig) -> Result<Vec<AnomalyEvent>, ShmError> {
    cfg.validate()?;
    let mut baseline = ChannelBaseline::default();
    Ok(points
        .iter()
        .filter_map(|p| baseline.observe(p, cfg))
        .collect())
}

/// Baselines for every channel, persistable across files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    pub channels: BTreeMap<String, ChannelBaseline>,
}

const STATE_FORMAT: &str = "edgebench-detector-state";
const STATE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct StateFile {
    format: String,
    version: u32,
    channels: BTreeMap<String, ChannelBaseline>,
}

impl DetectorState {
    pub fn load(path: &Path) -> Result<DetectorState, ShmError> {
        let text = fs::read_to_string(path)?;
        let file: StateFile =
            serde_json::from_str(&text).map_err(|e| ShmError::State(e.to_string()))?;
        if file.format != STATE_FORMAT {
            return Err(ShmError::State(format!("not a detector state file: {}", file.format)));
        }
        if file.version != STATE_VERSION {
            return Err(ShmError::State(format!("unsupported state version {}", file.version)));
        }
        Ok(DetectorState {
            channels: file.channels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ShmError> {
        let file = StateFile {
            format: STATE_FORMAT.into(),
            version: STATE_VERSION,
            channels: self.channels.clone(),
        };
        let text = serde_json::to_string_pretty(&file).expect("state serializes");
        fs::write(path, text)?;
        Ok(())
    }

    /// Feeds one channel's points through its persisted baseline.
    pub fn observe_channel(
        &mut self,
        points: &[RmsPoint],
        cfg: &DetectorConfig,
    ) -> Result<Vec<AnomalyEvent>, ShmError> {
        cfg.validate()?;
        let mut events = Vec::new();
        for point in points {
            let baseline = self.channels.entry(point.channel_id.clone()).or_default();
            if let Some(e) = baseline.observe(point, cfg) {
                events.push(e);
            }
        }
        Ok(events)
    }
}

/// RMS series and events derived from one sensor file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsReport {
    pub source_file: PathBuf,
    /// SHA-256 of the file bytes the report was computed from.
    pub source_checksum: String,
    pub points: Vec<RmsPoint>,
    pub events: Vec<AnomalyEvent>,
}

/// TDMS waveform convention: channels may carry a start time and a sample
/// increment as properties.
fn channel_timing(chan: &tdms::TdmsChannel) -> (DateTime<Utc>, f64) {
    let t0 = match chan.property("wf_start_time") {
        Some(TdmsValue::Timestamp(ts)) => {
            let base = Utc.with_ymd_and_hms(1904, 1, 1, 0, 0, 0).unwrap();
            let frac_ns = (ts.fractions as f64 / 2f64.powi(64) * 1e9) as i64;
            base + Duration::seconds(ts.seconds) + Duration::nanoseconds(frac_ns)
        }
        _ => Utc.timestamp_opt(0, 0).unwrap(),
    };
    let dt = match chan.property("wf_increment") {
        Some(TdmsValue::F64(dt)) if *dt > 0.0 => *dt,
        _ => 1.0,
    };
    (t0, dt)
}

/// Parses a sensor file, reduces every numeric channel to windowed RMS, and
/// runs the detector against the persisted baselines.
pub fn process_file(
    tdms_path: &Path,
    window_len: usize,
    cfg: &DetectorConfig,
    state: &mut DetectorState,
) -> Result<RmsReport, ShmError> {
    cfg.validate()?;
    let bytes = fs::read(tdms_path)?;
    let source_checksum = hex::encode(Sha256::digest(&bytes));
    let file = tdms::parse(&bytes)?;

    let mut points = Vec::new();
    let mut events = Vec::new();
    let mut numeric_channels = 0;
    for group in &file.groups {
        for chan in &group.channels {
            if !chan.data.data_type().is_numeric() || chan.data.is_empty() {
                continue;
            }
            numeric_channels += 1;
            let series = tdms::channel_data(&file, &group.name, &chan.name)?;
            let channel_id = format!("{}/{}", group.name, chan.name);
            let (t0, dt) = channel_timing(chan);
            let chan_points = windowed_rms(&series, window_len, &channel_id, t0, dt)?;
            events.extend(state.observe_channel(&chan_points, cfg)?);
            points.extend(chan_points);
        }
    }
    if numeric_channels == 0 {
        return Err(ShmError::NoNumericChannels);
    }
    Ok(RmsReport {
        source_file: tdms_path.to_path_buf(),
        source_checksum,
        points,
        events,
    })
}

fn fmt_time(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Nanos, true)
}

/// `channel_id,window_start_iso8601,window_len,rms` lines.
pub fn points_to_csv(points: &[RmsPoint]) -> String {
    let mut out = String::from("channel_id,window_start,window_len,rms\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.channel_id,
            fmt_time(&p.window_start),
            p.window_len,
            p.rms
        ));
    }
    out
}

/// Inverse of [`points_to_csv`]. The channel id is the only field that may
/// contain commas, so fields are split from the right.
pub fn points_from_csv(text: &str) -> Result<Vec<RmsPoint>, ShmError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| ShmError::BadRecord {
            line: i + 1,
            msg: msg.into(),
        };
        let mut fields = line.rsplitn(4, ',');
        let rms: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad("rms"))?;
        let window_len: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad("window_len"))?;
        let window_start = fields
            .next()
            .and_then(|f| DateTime::parse_from_rfc3339(f).ok())
            .ok_or_else(|| bad("window_start"))?
            .with_timezone(&Utc);
        let channel_id = fields.next().ok_or_else(|| bad("channel_id"))?.to_string();
        points.push(RmsPoint {
            channel_id,
            window_start,
            window_len,
            rms,
        });
    }
    Ok(points)
}

/// `channel_id,at,observed,expected,score,direction` lines.
pub fn events_to_csv(events: &[AnomalyEvent]) -> String {
    let mut out = String::from("channel_id,at,observed,expected,score,direction\n");
    for e in events {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.channel_id,
            fmt_time(&e.at),
            e.observed,
            e.expected,
            e.score,
            e.direction
        ));
    }
    out
}
