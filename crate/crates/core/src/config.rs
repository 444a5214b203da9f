//! Strict TOML configuration shared by every subcommand. Unknown keys are
//! errors: a silently ignored `padings = 10` typo would invalidate every
//! CPU delta measured under it.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::harness::{
    BenchmarkPlan, WorkloadSpec, DEFAULT_BATCH_SIZE, DEFAULT_PADDING_SECONDS,
    DEFAULT_REPETITIONS, DEFAULT_SAMPLING_INTERVAL,
};
use crate::shm::DetectorConfig;
use crate::spool::{RetryConfig, SinkConfig, SinkKind, SpoolerConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown key `{path}`")]
    UnknownKey { path: String },
    #[error("invalid value for `{path}`: {msg}")]
    InvalidValue { path: String, msg: String },
}

/// What a schema node accepts.
enum Node {
    Table(&'static [(&'static str, Node)]),
    Str,
    UInt,
    /// Integer or float, read as f64.
    Num,
    StrList,
    StrMap,
}

static WORKLOAD_SCHEMA: &[(&str, Node)] = &[
    ("command", Node::Str),
    ("args", Node::StrList),
    ("env", Node::StrMap),
    ("working_dir", Node::Str),
    ("input_manifest", Node::StrList),
];

static PLAN_SCHEMA: &[(&str, Node)] = &[
    ("workload", Node::Table(WORKLOAD_SCHEMA)),
    ("batch_size_b", Node::UInt),
    ("repetitions_r", Node::UInt),
    ("padding_seconds", Node::Num),
    ("sampling_interval", Node::Num),
    ("pre_run_hook", Node::Str),
    ("device_label", Node::Str),
];

static DETECTOR_SCHEMA: &[(&str, Node)] = &[
    ("trailing_window", Node::UInt),
    ("z_threshold", Node::Num),
    ("min_history", Node::UInt),
    ("absolute_floor", Node::Num),
];

static SINK_SCHEMA: &[(&str, Node)] = &[
    ("kind", Node::Str),
    ("target", Node::Str),
    ("max_attempts", Node::UInt),
    ("base_backoff_seconds", Node::Num),
    ("multiplier", Node::Num),
    ("jitter", Node::Num),
    ("retain_after_ack_seconds", Node::Num),
];

static SPOOL_SCHEMA: &[(&str, Node)] = &[
    ("inbox", Node::Str),
    ("journal", Node::Str),
    ("scan_interval_seconds", Node::Num),
    ("stability_interval_seconds", Node::Num),
    ("sink", Node::Table(SINK_SCHEMA)),
];

static ROOT_SCHEMA: &[(&str, Node)] = &[
    ("output_dir", Node::Str),
    ("log_level", Node::Str),
    ("plan", Node::Table(PLAN_SCHEMA)),
    ("detector", Node::Table(DETECTOR_SCHEMA)),
    ("spool", Node::Table(SPOOL_SCHEMA)),
];

fn check_node(value: &toml::Value, node: &Node, path: &str) -> Result<(), ConfigError> {
    let invalid = |msg: &str| {
        Err(ConfigError::InvalidValue {
            path: path.to_string(),
            msg: msg.to_string(),
        })
    };
    match node {
        Node::Table(schema) => {
            let toml::Value::Table(table) = value else {
                return invalid("expected a table");
            };
            for (key, child) in table {
                let child_path = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                match schema.iter().find(|(name, _)| name == key) {
                    None => {
                        return Err(ConfigError::UnknownKey { path: child_path });
                    }
                    Some((_, node)) => check_node(child, node, &child_path)?,
                }
            }
            Ok(())
        }
        Node::Str => match value {
            toml::Value::String(_) => Ok(()),
            _ => invalid("expected a string"),
        },
        Node::UInt => match value {
            toml::Value::Integer(i) if *i >= 0 => Ok(()),
            toml::Value::Integer(_) => invalid("expected a non-negative integer"),
            _ => invalid("expected an integer"),
        },
        Node::Num => match value {
            toml::Value::Integer(_) | toml::Value::Float(_) => Ok(()),
            _ => invalid("expected a number"),
        },
        Node::StrList => match value {
            toml::Value::Array(items) if items.iter().all(|i| i.is_str()) => Ok(()),
            _ => invalid("expected a list of strings"),
        },
        Node::StrMap => match value {
            toml::Value::Table(t) if t.values().all(|v| v.is_str()) => Ok(()),
            _ => invalid("expected a table of strings"),
        },
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let clamped = offset.min(text.len());
    let mut line = 1;
    let mut col = 1;
    for b in text[..clamped].bytes() {
        if b == b'\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

#[derive(Debug, Clone, Default, Deserialize)]
struct RawWorkload {
    #[serde(default)]
    command: String,
    #[serde(default)]
    args: Vec<String>,
    #[serde(default)]
    env: BTreeMap<String, String>,
    #[serde(default)]
    working_dir: Option<PathBuf>,
    #[serde(default)]
    input_manifest: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawPlan {
    #[serde(default)]
    workload: RawWorkload,
    #[serde(default = "d_batch")]
    batch_size_b: u32,
    #[serde(default = "d_reps")]
    repetitions_r: u32,
    #[serde(default = "d_padding")]
    padding_seconds: f64,
    #[serde(default = "d_interval")]
    sampling_interval: f64,
    #[serde(default)]
    pre_run_hook: Option<String>,
    #[serde(default = "d_device")]
    device_label: String,
}

fn d_batch() -> u32 {
    DEFAULT_BATCH_SIZE
}
fn d_reps() -> u32 {
    DEFAULT_REPETITIONS
}
fn d_padding() -> f64 {
    DEFAULT_PADDING_SECONDS
}
fn d_interval() -> f64 {
    DEFAULT_SAMPLING_INTERVAL
}
fn d_device() -> String {
    "device".into()
}

#[derive(Debug, Clone, Deserialize)]
struct RawDetector {
    trailing_window: Option<usize>,
    z_threshold: Option<f64>,
    min_history: Option<usize>,
    absolute_floor: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawSink {
    #[serde(default = "d_sink_kind")]
    kind: String,
    target: String,
    max_attempts: Option<u32>,
    base_backoff_seconds: Option<f64>,
    multiplier: Option<f64>,
    jitter: Option<f64>,
    retain_after_ack_seconds: Option<f64>,
}

fn d_sink_kind() -> String {
    "directory-copy".into()
}

#[derive(Debug, Clone, Deserialize)]
struct RawSpool {
    inbox: PathBuf,
    journal: Option<PathBuf>,
    scan_interval_seconds: Option<f64>,
    stability_interval_seconds: Option<f64>,
    sink: RawSink,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct RawConfig {
    output_dir: Option<PathBuf>,
    log_level: Option<String>,
    plan: Option<RawPlan>,
    detector: Option<RawDetector>,
    spool: Option<RawSpool>,
}

/// Parsed configuration; sections stay absent until a subcommand needs them.
#[derive(Debug, Clone, Default)]
pub struct CliConfig {
    pub output_dir: Option<PathBuf>,
    pub log_level: Option<String>,
    pub plan: Option<BenchmarkPlan>,
    pub detector: Option<DetectorConfig>,
    pub spool: Option<SpoolSettings>,
}

/// Spool section resolved to concrete settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SpoolSettings {
    pub inbox: PathBuf,
    pub journal: Option<PathBuf>,
    pub scan_interval: Duration,
    pub stability_interval: Duration,
    pub sink: SinkConfig,
}

impl SpoolSettings {
    /// Journal default: alongside the inbox, never inside it.
    pub fn into_spooler_config(self, output_dir: &std::path::Path) -> SpoolerConfig {
        let journal = self
            .journal
            .unwrap_or_else(|| output_dir.join("spool-journal.ndjson"));
        let mut config = SpoolerConfig::new(self.inbox, journal, self.sink);
        config.scan_interval = self.scan_interval;
        config.stability_interval = self.stability_interval;
        config
    }
}

fn duration_value(path: &str, seconds: f64) -> Result<Duration, ConfigError> {
    if !(seconds >= 0.0) || !seconds.is_finite() {
        return Err(ConfigError::InvalidValue {
            path: path.to_string(),
            msg: format!("{seconds} is not a valid duration"),
        });
    }
    Ok(Duration::from_secs_f64(seconds))
}

/// Strict parse: syntax errors carry line and column, unknown keys name the
/// offender, defaults fill whatever a present section leaves out.
pub fn parse_config(text: &str) -> Result<CliConfig, ConfigError> {
    let value: toml::Value = toml::from_str(text).map_err(|e| {
        let (line, col) = e
            .span()
            .map(|s| line_col(text, s.start))
            .unwrap_or((1, 1));
        ConfigError::Syntax {
            line,
            col,
            msg: e.message().to_string(),
        }
    })?;
    check_node(&value, &Node::Table(ROOT_SCHEMA), "")?;

    let raw: RawConfig = value.try_into().map_err(|e: toml::de::Error| {
        ConfigError::InvalidValue {
            path: "<config>".into(),
            msg: e.message().to_string(),
        }
    })?;

    let plan = raw.plan.map(|p| BenchmarkPlan {
        workload: WorkloadSpec {
            command: p.workload.command,
            args: p.workload.args,
            env: p.workload.env,
            working_dir: p.workload.working_dir,
            input_manifest: p.workload.input_manifest,
        },
        batch_size_b: p.batch_size_b,
        repetitions_r: p.repetitions_r,
        padding_seconds: p.padding_seconds,
        sampling_interval: p.sampling_interval,
        pre_run_hook: p.pre_run_hook,
        device_label: p.device_label,
    });

    let detector = raw.detector.map(|d| {
        let mut cfg = DetectorConfig::default();
        if let Some(w) = d.trailing_window {
            cfg.trailing_window = w;
        }
        if let Some(z) = d.z_threshold {
            cfg.z_threshold = z;
        }
        if let Some(m) = d.min_history {
            cfg.min_history = m;
        }
        cfg.absolute_floor = d.absolute_floor;
        cfg
    });

    let spool = match raw.spool {
        None => None,
        Some(s) => {
            let kind = match s.sink.kind.as_str() {
                "directory-copy" => SinkKind::DirectoryCopy,
                "http-put" => SinkKind::HttpPut,
                other => {
                    return Err(ConfigError::InvalidValue {
                        path: "spool.sink.kind".into(),
                        msg: format!("{other:?} is not directory-copy or http-put"),
                    })
                }
            };
            let defaults = RetryConfig::default();
            let retry = RetryConfig {
                max_attempts: s.sink.max_attempts.unwrap_or(defaults.max_attempts),
                base_backoff: duration_value(
                    "spool.sink.base_backoff_seconds",
                    s.sink
                        .base_backoff_seconds
                        .unwrap_or(defaults.base_backoff.as_secs_f64()),
                )?,
                multiplier: s.sink.multiplier.unwrap_or(defaults.multiplier),
                jitter: s.sink.jitter.unwrap_or(defaults.jitter),
            };
            Some(SpoolSettings {
                inbox: s.inbox,
                journal: s.journal,
                scan_interval: duration_value(
                    "spool.scan_interval_seconds",
                    s.scan_interval_seconds.unwrap_or(10.0),
                )?,
                stability_interval: duration_value(
                    "spool.stability_interval_seconds",
                    s.stability_interval_seconds.unwrap_or(2.0),
                )?,
                sink: SinkConfig {
                    kind,
                    target: s.sink.target,
                    retry,
                    retain_after_ack: duration_value(
                        "spool.sink.retain_after_ack_seconds",
                        s.sink.retain_after_ack_seconds.unwrap_or(0.0),
                    )?,
                },
            })
        }
    };

    Ok(CliConfig {
        output_dir: raw.output_dir,
        log_level: raw.log_level,
        plan,
        detector,
        spool,
    })
}
