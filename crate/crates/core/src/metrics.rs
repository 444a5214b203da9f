//! Turns run records into the three benchmark metrics — idle-baseline CPU
//! delta, active latency, memory statistics — and aggregates them across
//! repetitions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{PhaseWindow, RunRecord};
use crate::sampler::SampleLog;
use crate::stats::RunningStats;

#[derive(Debug, Clone, Copy)]
pub struct MetricsConfig {
    /// Standard deviation of the pooled idle samples above which the idle
    /// baseline is flagged unstable, in percentage points.
    pub idle_std_threshold_pct: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            idle_std_threshold_pct: 5.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no samples fall inside the window")]
    EmptyWindow,
    #[error("idle baseline unavailable: {0}")]
    IdleBaselineUnavailable(String),
    #[error("no memory samples inside the active window (raise the sampling cadence)")]
    NoMemorySamples,
    #[error("run did not complete its measurement protocol: {0}")]
    IncompleteRun(String),
    #[error("all runs excluded from aggregation")]
    AllRunsExcluded,
}

/// Arithmetic mean of cpu_pct over samples with window.start <= t < window.end.
pub fn phase_mean_cpu(samples: &SampleLog, window: &PhaseWindow) -> Result<f64, MetricsError> {
    let stats: RunningStats = samples
        .records
        .iter()
        .filter(|r| window.contains(r.t))
        .map(|r| r.cpu_pct)
        .collect();
    if stats.count() == 0 {
        return Err(MetricsError::EmptyWindow);
    }
    Ok(stats.mean())
}

/// The two-window subtraction result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpuDelta {
    /// active mean minus idle mean, never clamped; negative values signal a
    /// baseline problem and arrive flagged.
    pub delta_pct: f64,
    pub active_mean_pct: f64,
    pub idle_mean_pct: f64,
    pub idle_unstable: bool,
}

/// Mean CPU during the workload minus mean CPU over both idle pads, with
/// every idle sample weighted equally.
pub fn cpu_delta(run: &RunRecord, cfg: &MetricsConfig) -> Result<CpuDelta, MetricsError> {
    let windows = run
        .windows
        .ok_or_else(|| MetricsError::IncompleteRun("no phase windows".into()))?;
    let idle: RunningStats = run
        .samples
        .records
        .iter()
        .filter(|r| windows.pre_pad.contains(r.t) || windows.post_pad.contains(r.t))
        .map(|r| r.cpu_pct)
        .collect();
    if idle.count() == 0 {
        return Err(MetricsError::IdleBaselineUnavailable(
            "no samples in either padding window (was padding zero?)".into(),
        ));
    }
    let active_mean_pct = phase_mean_cpu(&run.samples, &windows.active)?;
    let idle_mean_pct = idle.mean();
    Ok(CpuDelta {
        delta_pct: active_mean_pct - idle_mean_pct,
        active_mean_pct,
        idle_mean_pct,
        idle_unstable: idle.sample_std() > cfg.idle_std_threshold_pct,
    })
}

/// Active window duration in seconds; padding is never included.
pub fn active_latency(run: &RunRecord) -> Result<f64, MetricsError> {
    let windows = run
        .windows
        .ok_or_else(|| MetricsError::IncompleteRun("no phase windows".into()))?;
    Ok(windows.active.duration_ns() as f64 / 1e9)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryStats {
    pub peak_bytes: u64,
    pub mean_bytes: f64,
    /// Peak RSS per item mark, in mark order; None when no marks were seen.
    pub per_item_peak_bytes: Option<Vec<Option<u64>>>,
}

/// Peak and mean of the RSS samples present inside the Active window.
pub fn memory_stats(run: &RunRecord) -> Result<MemoryStats, MetricsError> {
    let windows = run
        .windows
        .ok_or_else(|| MetricsError::IncompleteRun("no phase windows".into()))?;
    let mut peak = 0u64;
    let mut mean = RunningStats::new();
    for r in run.samples.records.iter().filter(|r| windows.active.contains(r.t)) {
        if let Some(rss) = r.workload_rss_bytes {
            peak = peak.max(rss);
            mean.push(rss as f64);
        }
    }
    if mean.count() == 0 {
        return Err(MetricsError::NoMemorySamples);
    }
    let per_item_peak_bytes = if run.item_marks.is_empty() {
        None
    } else {
        Some(run.item_marks.iter().map(|m| m.peak_rss_bytes).collect())
    };
    Ok(MemoryStats {
        peak_bytes: peak,
        mean_bytes: mean.mean(),
        per_item_peak_bytes,
    })
}

/// All metrics of one completed repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_index: u32,
    pub cpu_delta_pct: f64,
    pub active_cpu_mean_pct: f64,
    pub idle_cpu_mean_pct: f64,
    pub idle_unstable: bool,
    pub latency_seconds: f64,
    pub mem_peak_bytes: u64,
    pub mem_mean_bytes: f64,
    pub per_item_latency_seconds: Option<Vec<f64>>,
}

/// Computes every metric for one record; any failure excludes the run.
pub fn run_metrics(run: &RunRecord, cfg: &MetricsConfig) -> Result<RunMetrics, MetricsError> {
    if let Some(failure) = &run.failure {
        return Err(MetricsError::IncompleteRun(failure.to_string()));
    }
    let delta = cpu_delta(run, cfg)?;
    let latency_seconds = active_latency(run)?;
    let memory = memory_stats(run)?;
    let per_item_latency_seconds = if run.item_marks.is_empty() {
        None
    } else {
        Some(
            run.item_marks
                .iter()
                .map(|m| (m.end - m.start) as f64 / 1e9)
                .collect(),
        )
    };
    Ok(RunMetrics {
        run_index: run.run_index,
        cpu_delta_pct: delta.delta_pct,
        active_cpu_mean_pct: delta.active_mean_pct,
        idle_cpu_mean_pct: delta.idle_mean_pct,
        idle_unstable: delta.idle_unstable,
        latency_seconds,
        mem_peak_bytes: memory.peak_bytes,
        mem_mean_bytes: memory.mean_bytes,
        per_item_latency_seconds,
    })
}

/// Mean, sample standard deviation (n-1), minimum and maximum of one metric
/// across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl From<&RunningStats> for MetricStats {
    fn from(s: &RunningStats) -> MetricStats {
        MetricStats {
            mean: s.mean(),
            std: s.sample_std(),
            min: s.min(),
            max: s.max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedRun {
    pub run_index: u32,
    pub reason: String,
}

/// Aggregated statistics across the repetitions of one device-local plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub device_label: String,
    pub n_runs: u32,
    pub cpu_delta_pct: MetricStats,
    pub latency_seconds: MetricStats,
    pub mem_peak_bytes: MetricStats,
    pub excluded_runs: Vec<ExcludedRun>,
}

/// Folds per-run metrics into summary statistics.
pub fn aggregate(
    per_run: &[RunMetrics],
    excluded_runs: Vec<ExcludedRun>,
    device_label: &str,
) -> Result<MetricsSummary, MetricsError> {
    if per_run.is_empty() {
        return Err(MetricsError::AllRunsExcluded);
    }
    let delta: RunningStats = per_run.iter().map(|m| m.cpu_delta_pct).collect();
    let latency: RunningStats = per_run.iter().map(|m| m.latency_seconds).collect();
    let mem: RunningStats = per_run.iter().map(|m| m.mem_peak_bytes as f64).collect();
    Ok(MetricsSummary {
        device_label: device_label.to_string(),
        n_runs: per_run.len() as u32,
        cpu_delta_pct: MetricStats::from(&delta),
        latency_seconds: MetricStats::from(&latency),
        mem_peak_bytes: MetricStats::from(&mem),
        excluded_runs,
    })
}

/// Computes per-run metrics for every record, excludes failures with their
/// reasons, and aggregates the rest.
pub fn summarize(
    records: &[RunRecord],
    device_label: &str,
    cfg: &MetricsConfig,
) -> Result<(Vec<RunMetrics>, MetricsSummary), MetricsError> {
    let mut per_run = Vec::new();
    let mut excluded = Vec::new();
    for record in records {
        match run_metrics(record, cfg) {
            Ok(m) => per_run.push(m),
            Err(e) => excluded.push(ExcludedRun {
                run_index: record.run_index,
                reason: e.to_string(),
            }),
        }
    }
    let summary = aggregate(&per_run, excluded, device_label)?;
    Ok((per_run, summary))
}
