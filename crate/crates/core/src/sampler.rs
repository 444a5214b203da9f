//! System CPU counters, per-process memory, and the fixed-cadence sampling
//! loop that runs alongside a workload.
//!
//! The primary counter source is the kernel's cumulative per-core CPU time
//! table (`/proc/stat`). Sandboxed kernels sometimes stub that file out with
//! zeros while still metering the cgroup; in that case the cgroup's
//! cumulative usage is used as the busy counter and monotonic wall time as
//! the total, which preserves the cumulative-counter contract.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{mono_now_ns, WallClockAnchor};

/// Sampling faster than this would start perturbing the measurement.
pub const MIN_INTERVAL_NS: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("CPU counter source unavailable: {0}")]
    CounterSourceUnavailable(String),
    #[error("non-monotonic CPU counters ({0})")]
    NonMonotonicCounters(String),
    #[error("process {0} is gone")]
    ProcessGone(u32),
}

/// Cumulative busy/total tick pair for one core (or the whole system).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreTicks {
    pub busy_ticks: u64,
    pub total_ticks: u64,
}

/// Snapshot of cumulative CPU time counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpuCounters {
    pub per_core: Vec<CoreTicks>,
    pub aggregate: CoreTicks,
    /// Monotonic nanoseconds at capture.
    pub captured_at: u64,
}

fn aggregate_of(per_core: &[CoreTicks]) -> CoreTicks {
    per_core.iter().fold(CoreTicks::default(), |acc, c| CoreTicks {
        busy_ticks: acc.busy_ticks + c.busy_ticks,
        total_ticks: acc.total_ticks + c.total_ticks,
    })
}

/// Parses per-core lines of a `/proc/stat` document. Busy time is
/// user+nice+system+irq+softirq+steal; idle and iowait complete the total.
/// Guest time is already folded into user/nice by the kernel.
fn parse_proc_stat(text: &str) -> Result<Vec<CoreTicks>, SamplerError> {
    let mut cores = Vec::new();
    for line in text.lines() {
        let mut fields = line.split_ascii_whitespace();
        let Some(label) = fields.next() else { continue };
        if !label.starts_with("cpu") || label == "cpu" {
            continue;
        }
        let v: Vec<u64> = fields.map(|f| f.parse().unwrap_or(0)).collect();
        let get = |i: usize| v.get(i).copied().unwrap_or(0);
        let busy = get(0) + get(1) + get(2) + get(5) + get(6) + get(7);
        let idle = get(3) + get(4);
        cores.push(CoreTicks {
            busy_ticks: busy,
            total_ticks: busy + idle,
        });
    }
    if cores.is_empty() {
        return Err(SamplerError::CounterSourceUnavailable(
            "no per-core cpu lines found".into(),
        ));
    }
    Ok(cores)
}

/// Where cumulative CPU time comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CpuSource {
    /// The kernel's per-core time table.
    Procfs,
    /// Cgroup usage in nanoseconds plus wall time, split over `cores`.
    Cgroup { usage_path: String, scale: u64, cores: usize },
}

impl CpuSource {
    /// Picks the functional source: procfs when its counters advance from
    /// zero (always true on a real kernel), otherwise cgroup usage.
    pub fn detect() -> Result<CpuSource, SamplerError> {
        let text = fs::read_to_string("/proc/stat")
            .map_err(|e| SamplerError::CounterSourceUnavailable(e.to_string()))?;
        let cores = parse_proc_stat(&text)?;
        if aggregate_of(&cores).total_ticks > 0 {
            return Ok(CpuSource::Procfs);
        }
        let n = cores.len();
        // cgroup v1 exposes nanoseconds, v2 microseconds
        let v1 = "/sys/fs/cgroup/cpuacct/cpuacct.usage";
        if Path::new(v1).exists() {
            return Ok(CpuSource::Cgroup {
                usage_path: v1.into(),
                scale: 1,
                cores: n,
            });
        }
        let v2 = "/sys/fs/cgroup/cpu.stat";
        if Path::new(v2).exists() {
            return Ok(CpuSource::Cgroup {
                usage_path: v2.into(),
                scale: 1000,
                cores: n,
            });
        }
        Ok(CpuSource::Procfs)
    }

    pub fn snapshot(&self) -> Result<CpuCounters, SamplerError> {
        match self {
            CpuSource::Procfs => {
                let text = fs::read_to_string("/proc/stat")
                    .map_err(|e| SamplerError::CounterSourceUnavailable(e.to_string()))?;
                let captured_at = mono_now_ns();
                let per_core = parse_proc_stat(&text)?;
                let aggregate = aggregate_of(&per_core);
                Ok(CpuCounters {
                    per_core,
                    aggregate,
                    captured_at,
                })
            }
            CpuSource::Cgroup {
                usage_path,
                scale,
                cores,
            } => {
                let text = fs::read_to_string(usage_path)
                    .map_err(|e| SamplerError::CounterSourceUnavailable(e.to_string()))?;
                let captured_at = mono_now_ns();
                let usage_ns = parse_cgroup_usage(&text)?
                    .checked_mul(*scale)
                    .ok_or_else(|| {
                        SamplerError::CounterSourceUnavailable("usage overflow".into())
                    })?;
                let n = (*cores).max(1);
                // distribute usage so the per-core sum equals it exactly
                let per_core = (0..n)
                    .map(|i| CoreTicks {
                        busy_ticks: (usage_ns + (n - 1 - i) as u64) / n as u64,
                        total_ticks: captured_at,
                    })
                    .collect::<Vec<_>>();
                let aggregate = aggregate_of(&per_core);
                Ok(CpuCounters {
                    per_core,
                    aggregate,
                    captured_at,
                })
            }
        }
    }
}

/// Accepts either a bare nanosecond count (cgroup v1) or a `usage_usec`
/// keyed stat file (cgroup v2).
fn parse_cgroup_usage(text: &str) -> Result<u64, SamplerError> {
    let first = text.lines().next().unwrap_or("");
    if let Ok(v) = first.trim().parse::<u64>() {
        return Ok(v);
    }
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("usage_usec ") {
            return rest.trim().parse().map_err(|_| {
                SamplerError::CounterSourceUnavailable("bad usage_usec value".into())
            });
        }
    }
    Err(SamplerError::CounterSourceUnavailable(
        "unrecognized cgroup usage format".into(),
    ))
}

static CPU_SOURCE: Lazy<Result<CpuSource, SamplerError>> = Lazy::new(CpuSource::detect);

/// Snapshot from the detected system counter source.
pub fn snapshot_cpu() -> Result<CpuCounters, SamplerError> {
    match &*CPU_SOURCE {
        Ok(source) => source.snapshot(),
        Err(e) => Err(SamplerError::CounterSourceUnavailable(e.to_string())),
    }
}

/// System-wide busy percentage between two snapshots, normalized over all
/// cores: 100 x busy delta / total delta. A zero total delta yields 0.
pub fn cpu_percent(prev: &CpuCounters, cur: &CpuCounters) -> Result<f64, SamplerError> {
    let busy = cur
        .aggregate
        .busy_ticks
        .checked_sub(prev.aggregate.busy_ticks)
        .ok_or_else(|| SamplerError::NonMonotonicCounters("busy ticks went backwards".into()))?;
    let total = cur
        .aggregate
        .total_ticks
        .checked_sub(prev.aggregate.total_ticks)
        .ok_or_else(|| SamplerError::NonMonotonicCounters("total ticks went backwards".into()))?;
    if total == 0 {
        return Ok(0.0);
    }
    Ok(100.0 * busy as f64 / total as f64)
}

/// Resident set size in bytes from a process status document.
fn parse_vm_rss(status: &str) -> Option<u64> {
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmRSS:") {
            let kb: u64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
            return Some(kb * 1024);
        }
    }
    None
}

fn read_proc_status(pid: u32) -> Option<(Option<u32>, u64)> {
    let status = fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
    let mut ppid = None;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("PPid:") {
            ppid = rest.trim().parse().ok();
            break;
        }
    }
    Some((ppid, parse_vm_rss(&status).unwrap_or(0)))
}

/// Sum of resident set sizes over a process and all live descendants.
pub fn process_tree_rss(root_pid: u32) -> Result<u64, SamplerError> {
    let mut procs: Vec<(u32, u32, u64)> = Vec::new(); // (pid, ppid, rss)
    let entries = fs::read_dir("/proc")
        .map_err(|e| SamplerError::CounterSourceUnavailable(e.to_string()))?;
    for entry in entries.flatten() {
        let Ok(pid) = entry.file_name().to_string_lossy().parse::<u32>() else {
            continue;
        };
        if let Some((ppid, rss)) = read_proc_status(pid) {
            procs.push((pid, ppid.unwrap_or(0), rss));
        }
    }
    if !procs.iter().any(|&(pid, _, _)| pid == root_pid) {
        return Err(SamplerError::ProcessGone(root_pid));
    }
    let mut total = 0u64;
    let mut frontier = vec![root_pid];
    let mut seen = std::collections::HashSet::new();
    while let Some(pid) = frontier.pop() {
        if !seen.insert(pid) {
            continue;
        }
        for &(p, pp, rss) in &procs {
            if p == pid {
                total += rss;
            }
            if pp == pid && p != pid {
                frontier.push(p);
            }
        }
    }
    Ok(total)
}

/// One sampling tick. `gap` marks records that follow a failed read or a
/// scheduler stall longer than twice the cadence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: u64,
    pub cpu_pct: f64,
    pub workload_rss_bytes: Option<u64>,
    pub gap: bool,
}

/// Ordered sample log for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLog {
    pub interval_ns: u64,
    pub records: Vec<SampleRecord>,
    pub wall_clock_anchor: WallClockAnchor,
}

/// Workload pid cell shared between the harness and the sampler; 0 means no
/// workload is alive.
#[derive(Debug, Clone, Default)]
pub struct SharedPid(Arc<AtomicU32>);

impl SharedPid {
    pub fn none() -> SharedPid {
        SharedPid::default()
    }

    pub fn fixed(pid: u32) -> SharedPid {
        let cell = SharedPid::default();
        cell.set(Some(pid));
        cell
    }

    pub fn set(&self, pid: Option<u32>) {
        self.0.store(pid.unwrap_or(0), Ordering::SeqCst);
    }

    pub fn get(&self) -> Option<u32> {
        match self.0.load(Ordering::SeqCst) {
            0 => None,
            pid => Some(pid),
        }
    }
}

/// Samples CPU (and workload RSS when a pid is set) at the cadence until the
/// stop flag is raised. Failed reads never abort the loop; they surface as
/// gap-flagged records once reads recover.
pub fn run_sampler(interval_ns: u64, workload_pid: SharedPid, stop: &AtomicBool) -> SampleLog {
    let interval = interval_ns.max(MIN_INTERVAL_NS);
    if interval != interval_ns {
        log::warn!("sampling interval raised to the {MIN_INTERVAL_NS} ns floor");
    }
    let wall_clock_anchor = WallClockAnchor::capture();
    let mut records = Vec::new();
    let mut prev = snapshot_cpu().ok();
    let mut gap_pending = prev.is_none();
    let mut last_t: Option<u64> = None;
    let mut next_tick = mono_now_ns() + interval;

    while !stop.load(Ordering::SeqCst) {
        // chunked sleep keeps stop latency low without measurable load
        let now = mono_now_ns();
        if now < next_tick {
            thread::sleep(Duration::from_nanos((next_tick - now).min(50_000_000)));
            continue;
        }

        match snapshot_cpu() {
            Err(_) => {
                gap_pending = true;
            }
            Ok(cur) => {
                let pct = match prev.as_ref() {
                    None => None,
                    Some(p) => cpu_percent(p, &cur).ok(),
                };
                match pct {
                    None => {
                        // counter wrap or missing baseline: restart from here
                        gap_pending = true;
                        prev = Some(cur);
                    }
                    Some(cpu_pct) => {
                        let workload_rss_bytes = workload_pid
                            .get()
                            .and_then(|pid| process_tree_rss(pid).ok());
                        let stalled = last_t.is_some_and(|lt| cur.captured_at - lt > 2 * interval);
                        records.push(SampleRecord {
                            t: cur.captured_at,
                            cpu_pct,
                            workload_rss_bytes,
                            gap: gap_pending || stalled,
                        });
                        gap_pending = false;
                        last_t = Some(cur.captured_at);
                        prev = Some(cur);
                    }
                }
            }
        }

        next_tick += interval;
        let now = mono_now_ns();
        if next_tick < now {
            next_tick = now + interval; // skip missed ticks; spacing flags the stall
        }
    }

    SampleLog {
        interval_ns: interval,
        records,
        wall_clock_anchor,
    }
}

/// Sampler running on its own thread; exactly one per run.
pub struct Sampler {
    stop: Arc<AtomicBool>,
    handle: thread::JoinHandle<SampleLog>,
}

impl Sampler {
    pub fn spawn(interval_ns: u64, workload_pid: SharedPid) -> Sampler {
        let stop = Arc::new(AtomicBool::new(false));
        let stop2 = Arc::clone(&stop);
        let handle = thread::spawn(move || run_sampler(interval_ns, workload_pid, &stop2));
        Sampler { stop, handle }
    }

    /// Signals the loop and hands the completed log over.
    pub fn stop(self) -> SampleLog {
        self.stop.store(true, Ordering::SeqCst);
        self.handle.join().expect("sampler thread panicked")
    }
}
