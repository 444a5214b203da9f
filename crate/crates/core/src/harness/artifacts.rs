//! Run artifact layout: `<out>/<plan-hash>/<run-index>/` holding
//! `samples.csv`, `marks.csv`, `meta.json`, `stdout.log`, `stderr.log`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BenchmarkPlan, ItemMark, PhaseWindows, RunFailure, RunRecord};
use crate::clock::WallClockAnchor;
use crate::sampler::{SampleLog, SampleRecord};

/// Stable identifier for a plan: prefix of the digest of its canonical JSON
/// form. Runs of the same plan land in the same directory.
pub fn plan_hash(plan: &BenchmarkPlan) -> String {
    let canonical = serde_json::to_vec(plan).expect("plan serializes");
    let digest = Sha256::digest(&canonical);
    hex::encode(&digest[..8])
}

/// Everything about a run except the bulk sample/mark tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_index: u32,
    pub windows: Option<PhaseWindows>,
    pub workload_exit: Option<i32>,
    pub failure: Option<RunFailure>,
    pub marker_warnings: Vec<String>,
    pub interval_ns: u64,
    pub wall_clock_anchor: WallClockAnchor,
    pub stdout_log: Option<PathBuf>,
    pub stderr_log: Option<PathBuf>,
}

fn samples_csv(samples: &[SampleRecord]) -> String {
    let mut out = String::from("t_ns,cpu_pct,rss_bytes,gap\n");
    for r in samples {
        let rss = r
            .workload_rss_bytes
            .map(|b| b.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.t,
            r.cpu_pct,
            rss,
            if r.gap { 1 } else { 0 }
        ));
    }
    out
}

fn marks_csv(marks: &[ItemMark]) -> String {
    let mut out = String::from("item_index,start_ns,end_ns,peak_rss_bytes\n");
    for m in marks {
        let peak = m.peak_rss_bytes.map(|b| b.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", m.item_index, m.start, m.end, peak));
    }
    out
}

pub fn write_run_record(run_dir: &Path, record: &RunRecord) -> std::io::Result<()> {
    let meta = RunMeta {
        run_index: record.run_index,
        windows: record.windows,
        workload_exit: record.workload_exit,
        failure: record.failure.clone(),
        marker_warnings: record.marker_warnings.clone(),
        interval_ns: record.samples.interval_ns,
        wall_clock_anchor: record.samples.wall_clock_anchor,
        stdout_log: record.stdout_log.clone(),
        stderr_log: record.stderr_log.clone(),
    };
    fs::write(
        run_dir.join("meta.json"),
        serde_json::to_vec_pretty(&meta).expect("meta serializes"),
    )?;
    fs::write(run_dir.join("samples.csv"), samples_csv(&record.samples.records))?;
    fs::write(run_dir.join("marks.csv"), marks_csv(&record.item_marks))?;
    Ok(())
}

fn bad_data(msg: String) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, msg)
}

pub fn parse_samples_csv(text: &str) -> std::io::Result<Vec<SampleRecord>> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad_data(format!("samples.csv line {}: bad field count", i + 1)));
        }
        let parse_err = |what: &str| bad_data(format!("samples.csv line {}: bad {what}", i + 1));
        records.push(SampleRecord {
            t: fields[0].parse().map_err(|_| parse_err("t_ns"))?,
            cpu_pct: fields[1].parse().map_err(|_| parse_err("cpu_pct"))?,
            workload_rss_bytes: if fields[2].is_empty() {
                None
            } else {
                Some(fields[2].parse().map_err(|_| parse_err("rss_bytes"))?)
            },
            gap: fields[3] == "1",
        });
    }
    Ok(records)
}

fn parse_marks_csv(text: &str) -> std::io::Result<Vec<ItemMark>> {
    let mut marks = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad_data(format!("marks.csv line {}: bad field count", i + 1)));
        }
        let parse_err = |what: &str| bad_data(format!("marks.csv line {}: bad {what}", i + 1));
        marks.push(ItemMark {
            item_index: fields[0].parse().map_err(|_| parse_err("item_index"))?,
            start: fields[1].parse().map_err(|_| parse_err("start_ns"))?,
            end: fields[2].parse().map_err(|_| parse_err("end_ns"))?,
            peak_rss_bytes: if fields[3].is_empty() {
                None
            } else {
                Some(fields[3].parse().map_err(|_| parse_err("peak_rss_bytes"))?)
            },
        });
    }
    Ok(marks)
}

/// Reconstructs a record from its artifact directory.
pub fn read_run_record(run_dir: &Path) -> std::io::Result<RunRecord> {
    let meta: RunMeta = serde_json::from_slice(&fs::read(run_dir.join("meta.json"))?)
        .map_err(|e| bad_data(format!("meta.json: {e}")))?;
    let samples = parse_samples_csv(&fs::read_to_string(run_dir.join("samples.csv"))?)?;
    let marks = parse_marks_csv(&fs::read_to_string(run_dir.join("marks.csv"))?)?;
    Ok(RunRecord {
        run_index: meta.run_index,
        windows: meta.windows,
        samples: SampleLog {
            interval_ns: meta.interval_ns,
            records: samples,
            wall_clock_anchor: meta.wall_clock_anchor,
        },
        item_marks: marks,
        marker_warnings: meta.marker_warnings,
        workload_exit: meta.workload_exit,
        failure: meta.failure,
        stdout_log: meta.stdout_log,
        stderr_log: meta.stderr_log,
    })
}
