//! Benchmark orchestration: run a workload command over a B-item batch, R
//! times, each repetition wrapped in idle padding windows with a concurrent
//! sampler and a stdout reader capturing per-item markers.

mod artifacts;
mod marker;

pub use artifacts::{plan_hash, read_run_record, write_run_record, RunMeta};
pub use marker::{parse_markers, parse_markers_with, ItemMark, MarkerLog};

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::mono_now_ns;
use crate::sampler::{SampleLog, Sampler, SharedPid, MIN_INTERVAL_NS};

/// The command under measurement and the batch it runs over.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
    #[serde(default)]
    pub working_dir: Option<PathBuf>,
    /// Input item identifiers appended to the argument list; when per-item
    /// metrics are requested its length must equal the batch size.
    #[serde(default)]
    pub input_manifest: Vec<String>,
}

/// Full experiment description for one device-local run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlan {
    pub workload: WorkloadSpec,
    pub batch_size_b: u32,
    pub repetitions_r: u32,
    /// Idle window before and after the workload, in seconds.
    pub padding_seconds: f64,
    /// Sampling cadence, in seconds.
    pub sampling_interval: f64,
    pub pre_run_hook: Option<String>,
    pub device_label: String,
}

pub const DEFAULT_BATCH_SIZE: u32 = 100;
pub const DEFAULT_REPETITIONS: u32 = 10;
pub const DEFAULT_PADDING_SECONDS: f64 = 30.0;
pub const DEFAULT_SAMPLING_INTERVAL: f64 = 1.0;

impl BenchmarkPlan {
    pub fn new(workload: WorkloadSpec) -> BenchmarkPlan {
        BenchmarkPlan {
            workload,
            batch_size_b: DEFAULT_BATCH_SIZE,
            repetitions_r: DEFAULT_REPETITIONS,
            padding_seconds: DEFAULT_PADDING_SECONDS,
            sampling_interval: DEFAULT_SAMPLING_INTERVAL,
            pre_run_hook: None,
            device_label: "device".into(),
        }
    }

    pub fn sampling_interval_ns(&self) -> u64 {
        (self.sampling_interval * 1e9) as u64
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::InvalidPlan(msg));
        if self.workload.command.is_empty() {
            return fail("workload.command is empty".into());
        }
        if self.batch_size_b < 1 {
            return fail("batch_size_b must be at least 1".into());
        }
        if self.repetitions_r < 1 {
            return fail("repetitions_r must be at least 1".into());
        }
        if !(self.padding_seconds >= 0.0) {
            return fail(format!("padding_seconds {} is negative", self.padding_seconds));
        }
        if !(self.sampling_interval > 0.0) {
            return fail(format!(
                "sampling_interval {} must be positive",
                self.sampling_interval
            ));
        }
        if self.sampling_interval_ns() < MIN_INTERVAL_NS {
            return fail(format!(
                "sampling_interval {}s is below the {}ms floor",
                self.sampling_interval,
                MIN_INTERVAL_NS / 1_000_000
            ));
        }
        if !self.workload.input_manifest.is_empty()
            && self.workload.input_manifest.len() != self.batch_size_b as usize
        {
            return fail(format!(
                "input_manifest has {} items but batch_size_b is {}",
                self.workload.input_manifest.len(),
                self.batch_size_b
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    PrePad,
    Active,
    PostPad,
}

/// Half-open-by-convention window on the monotonic clock; zero padding
/// yields an empty window (end == start).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseWindow {
    pub phase: Phase,
    pub start: u64,
    pub end: u64,
}

impl PhaseWindow {
    pub fn duration_ns(&self) -> u64 {
        self.end - self.start
    }

    pub fn contains(&self, t: u64) -> bool {
        self.start <= t && t < self.end
    }
}

/// The three disjoint, ordered windows of one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseWindows {
    pub pre_pad: PhaseWindow,
    pub active: PhaseWindow,
    pub post_pad: PhaseWindow,
}

/// Why a repetition is excluded from aggregation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunFailure {
    HookFailed(String),
    SpawnFailed(String),
    NonZeroExit(i32),
    Signaled(String),
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunFailure::HookFailed(m) => write!(f, "pre-run hook failed: {m}"),
            RunFailure::SpawnFailed(m) => write!(f, "workload spawn failed: {m}"),
            RunFailure::NonZeroExit(c) => write!(f, "workload exited with status {c}"),
            RunFailure::Signaled(m) => write!(f, "workload killed by signal: {m}"),
        }
    }
}

/// One repetition's raw evidence. Failed repetitions are recorded and
/// flagged, never dropped, so a plan always yields exactly R records.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_index: u32,
    pub windows: Option<PhaseWindows>,
    pub samples: SampleLog,
    pub item_marks: Vec<ItemMark>,
    pub marker_warnings: Vec<String>,
    pub workload_exit: Option<i32>,
    pub failure: Option<RunFailure>,
    pub stdout_log: Option<PathBuf>,
    pub stderr_log: Option<PathBuf>,
}

impl RunRecord {
    /// True when the repetition completed its full measurement protocol.
    pub fn is_clean(&self) -> bool {
        self.failure.is_none() && self.windows.is_some()
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Runs the full plan: R repetitions in order, each one producing a record
/// and its artifact files under `out_root/<plan-hash>/<run-index>/`.
pub fn run_plan(plan: &BenchmarkPlan, out_root: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    plan.validate()?;
    let plan_dir = out_root.join(plan_hash(plan));
    fs::create_dir_all(&plan_dir)?;
    fs::write(
        plan_dir.join("plan.json"),
        serde_json::to_vec_pretty(plan).expect("plan serializes"),
    )?;

    let mut records = Vec::with_capacity(plan.repetitions_r as usize);
    for run_index in 0..plan.repetitions_r {
        let run_dir = plan_dir.join(run_index.to_string());
        fs::create_dir_all(&run_dir)?;
        let record = execute_repetition(plan, run_index, &run_dir)?;
        if let Some(failure) = &record.failure {
            log::warn!("run {run_index}: {failure}");
        }
        write_run_record(&run_dir, &record)?;
        records.push(record);
    }
    Ok(records)
}

fn empty_sample_log(plan: &BenchmarkPlan) -> SampleLog {
    SampleLog {
        interval_ns: plan.sampling_interval_ns(),
        records: Vec::new(),
        wall_clock_anchor: crate::clock::WallClockAnchor::capture(),
    }
}

/// One Algorithm-1 iteration: hook, pre-pad, workload over the batch,
/// post-pad, all under one sampler.
pub fn execute_repetition(
    plan: &BenchmarkPlan,
    run_index: u32,
    run_dir: &Path,
) -> Result<RunRecord, HarnessError> {
    let aborted = |failure: RunFailure| RunRecord {
        run_index,
        windows: None,
        samples: empty_sample_log(plan),
        item_marks: Vec::new(),
        marker_warnings: Vec::new(),
        workload_exit: None,
        failure: Some(failure),
        stdout_log: None,
        stderr_log: None,
    };

    if let Some(hook) = &plan.pre_run_hook {
        match Command::new("sh").arg("-c").arg(hook).status() {
            Ok(status) if status.success() => {}
            Ok(status) => {
                return Ok(aborted(RunFailure::HookFailed(format!(
                    "exit status {status}"
                ))))
            }
            Err(e) => return Ok(aborted(RunFailure::HookFailed(e.to_string()))),
        }
    }

    let stdout_path = run_dir.join("stdout.log");
    let stderr_path = run_dir.join("stderr.log");
    let stderr_file = fs::File::create(&stderr_path)?;

    let pid_cell = SharedPid::none();
    let sampler = Sampler::spawn(plan.sampling_interval_ns(), pid_cell.clone());
    let pad = Duration::from_secs_f64(plan.padding_seconds);

    let pre_start = mono_now_ns();
    thread::sleep(pad);
    let pre_end = mono_now_ns();

    let mut cmd = Command::new(&plan.workload.command);
    cmd.args(&plan.workload.args)
        .args(&plan.workload.input_manifest)
        .envs(&plan.workload.env)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(stderr_file);
    if let Some(dir) = &plan.workload.working_dir {
        cmd.current_dir(dir);
    }

    let active_start = mono_now_ns();
    let mut child = match cmd.spawn() {
        Ok(child) => child,
        Err(e) => {
            sampler.stop();
            return Ok(aborted(RunFailure::SpawnFailed(e.to_string())));
        }
    };
    pid_cell.set(Some(child.id()));

    let child_stdout = child.stdout.take().expect("stdout was requested piped");
    let stdout_file = fs::File::create(&stdout_path)?;
    let reader = thread::spawn(move || {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(stdout_file);
        let log = parse_markers_with(BufReader::new(child_stdout), |line| {
            let _ = writeln!(out, "{line}");
        });
        let _ = out.flush();
        log
    });

    let status = child.wait()?;
    let active_end = mono_now_ns();
    pid_cell.set(None);

    let post_start = mono_now_ns();
    thread::sleep(pad);
    let post_end = mono_now_ns();

    let samples = sampler.stop();
    let marker_log = reader.join().expect("stdout reader panicked");

    let active = PhaseWindow {
        phase: Phase::Active,
        start: active_start,
        end: active_end,
    };
    let windows = PhaseWindows {
        pre_pad: PhaseWindow {
            phase: Phase::PrePad,
            start: pre_start,
            end: pre_end,
        },
        active,
        post_pad: PhaseWindow {
            phase: Phase::PostPad,
            start: post_start,
            end: post_end,
        },
    };

    let mut marker_warnings = marker_log.warnings;
    let mut item_marks = Vec::with_capacity(marker_log.marks.len());
    for mut mark in marker_log.marks {
        if mark.item_index >= plan.batch_size_b as usize {
            marker_warnings.push(format!(
                "item {} is outside the batch of {}, dropped",
                mark.item_index, plan.batch_size_b
            ));
            continue;
        }
        // line receipt can trail process exit by one pipe flush
        mark.start = mark.start.clamp(active.start, active.end);
        mark.end = mark.end.clamp(active.start, active.end);
        mark.peak_rss_bytes = samples
            .records
            .iter()
            .filter(|r| mark.start <= r.t && r.t <= mark.end)
            .filter_map(|r| r.workload_rss_bytes)
            .max();
        item_marks.push(mark);
    }

    let workload_exit = status.code();
    let failure = if status.success() {
        None
    } else {
        match workload_exit {
            Some(code) => Some(RunFailure::NonZeroExit(code)),
            None => Some(RunFailure::Signaled(status.to_string())),
        }
    };

    Ok(RunRecord {
        run_index,
        windows: Some(windows),
        samples,
        item_marks,
        marker_warnings,
        workload_exit,
        failure,
        stdout_log: Some(stdout_path),
        stderr_log: Some(stderr_path),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sleep_plan(secs: f64) -> BenchmarkPlan {
        let mut plan = BenchmarkPlan::new(WorkloadSpec {
            command: "sleep".into(),
            args: vec![format!("{secs}")],
            ..WorkloadSpec::default()
        });
        plan.batch_size_b = 1;
        plan.repetitions_r = 1;
        plan.padding_seconds = 0.05;
        plan.sampling_interval = 0.02;
        plan
    }

    #[test]
    fn validate_catches_bad_plans() {
        let good = sleep_plan(0.1);
        assert!(good.validate().is_ok());

        let mut p = good.clone();
        p.workload.command.clear();
        assert!(p.validate().is_err());

        let mut p = good.clone();
        p.batch_size_b = 0;
        assert!(p.validate().is_err());

        let mut p = good.clone();
        p.repetitions_r = 0;
        assert!(p.validate().is_err());

        let mut p = good.clone();
        p.padding_seconds = -1.0;
        assert!(p.validate().is_err());

        let mut p = good.clone();
        p.sampling_interval = 0.001;
        assert!(p.validate().is_err());

        let mut p = good.clone();
        p.workload.input_manifest = vec!["a".into(), "b".into()];
        assert!(p.validate().is_err());
    }

    #[test]
    fn defaults_follow_the_protocol() {
        let plan = BenchmarkPlan::new(WorkloadSpec::default());
        assert_eq!(plan.batch_size_b, 100);
        assert_eq!(plan.repetitions_r, 10);
        assert_eq!(plan.padding_seconds, 30.0);
        assert_eq!(plan.sampling_interval, 1.0);
    }
}
