//! edgebench: one binary exposing the benchmark harness, the sensor-file
//! pipeline, the store-and-forward spool, and report rendering.
//!
//! Exit codes: 0 success, 1 measurement or pipeline error, 2 configuration
//! error, 3 workload failure (bench, when every run was excluded).

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use edgebench_core::config::{parse_config, CliConfig, SpoolSettings};
use edgebench_core::harness::{read_run_record, run_plan, BenchmarkPlan, WorkloadSpec};
use edgebench_core::metrics::{summarize, MetricsConfig, MetricsError};
use edgebench_core::report::{
    emit_cpu_timeseries_svg, emit_csv, emit_json, emit_radar_svg, normalize_radar,
    parse_summary_json, DeviceRegistry,
};
use edgebench_core::shm::{
    detect as detect_points, events_to_csv, points_from_csv, points_to_csv, process_file,
    DetectorConfig, DetectorState,
};
use edgebench_core::spool::{SinkKind, Spooler};
use edgebench_core::tdms;

#[derive(Parser)]
#[command(name = "edgebench", version, about = "Edge workload benchmarking and SHM data path")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the benchmark protocol described by the config's [plan] section.
    Bench(BenchArgs),
    /// Inspect sensor files.
    Tdms {
        #[command(subcommand)]
        command: TdmsCommand,
    },
    /// Windowed RMS (and detection) over a sensor file.
    Rms(RmsArgs),
    /// Rolling-baseline anomaly detection over an RMS points stream.
    Detect(DetectArgs),
    /// Store-and-forward spool.
    Spool {
        #[command(subcommand)]
        command: SpoolCommand,
    },
    /// Render comparison artifacts from summaries and run records.
    Report {
        #[command(subcommand)]
        command: ReportCommand,
    },
    /// Device registry.
    Devices {
        #[command(subcommand)]
        command: DevicesCommand,
    },
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "output_dir", value_name = "DIR")]
    output_dir: Option<PathBuf>,
    #[arg(long = "log_level", value_name = "LEVEL")]
    log_level: Option<String>,
}

/// Flag overrides for the [plan] section, named after their config keys.
#[derive(Args, Clone, Default)]
struct PlanOverrides {
    #[arg(long = "plan.workload.command")]
    workload_command: Option<String>,
    /// Comma-separated argument list.
    #[arg(long = "plan.workload.args", value_delimiter = ',', allow_hyphen_values = true)]
    workload_args: Option<Vec<String>>,
    /// NAME=VALUE, repeatable.
    #[arg(long = "plan.workload.env")]
    workload_env: Vec<String>,
    #[arg(long = "plan.workload.working_dir")]
    workload_working_dir: Option<PathBuf>,
    /// Comma-separated item identifiers.
    #[arg(long = "plan.workload.input_manifest", value_delimiter = ',')]
    workload_input_manifest: Option<Vec<String>>,
    #[arg(long = "plan.batch_size_b")]
    batch_size_b: Option<u32>,
    #[arg(long = "plan.repetitions_r")]
    repetitions_r: Option<u32>,
    #[arg(long = "plan.padding_seconds")]
    padding_seconds: Option<f64>,
    #[arg(long = "plan.sampling_interval")]
    sampling_interval: Option<f64>,
    #[arg(long = "plan.pre_run_hook")]
    pre_run_hook: Option<String>,
    #[arg(long = "plan.device_label")]
    device_label: Option<String>,
}

impl PlanOverrides {
    fn apply(&self, plan: Option<BenchmarkPlan>) -> Result<Option<BenchmarkPlan>, Failure> {
        let mut plan = match (plan, self.workload_command.as_ref()) {
            (Some(p), _) => p,
            (None, Some(_)) => BenchmarkPlan::new(WorkloadSpec::default()),
            (None, None) if self.is_empty() => return Ok(None),
            (None, None) => {
                return Err(Failure::config(anyhow!(
                    "plan overrides given but no [plan] section and no --plan.workload.command"
                )))
            }
        };
        if let Some(v) = &self.workload_command {
            plan.workload.command = v.clone();
        }
        if let Some(v) = &self.workload_args {
            plan.workload.args = v.clone();
        }
        for pair in &self.workload_env {
            let (name, value) = pair.split_once('=').ok_or_else(|| {
                Failure::config(anyhow!("--plan.workload.env wants NAME=VALUE, got {pair:?}"))
            })?;
            plan.workload.env.insert(name.to_string(), value.to_string());
        }
        if let Some(v) = &self.workload_working_dir {
            plan.workload.working_dir = Some(v.clone());
        }
        if let Some(v) = &self.workload_input_manifest {
            plan.workload.input_manifest = v.clone();
        }
        if let Some(v) = self.batch_size_b {
            plan.batch_size_b = v;
        }
        if let Some(v) = self.repetitions_r {
            plan.repetitions_r = v;
        }
        if let Some(v) = self.padding_seconds {
            plan.padding_seconds = v;
        }
        if let Some(v) = self.sampling_interval {
            plan.sampling_interval = v;
        }
        if let Some(v) = &self.pre_run_hook {
            plan.pre_run_hook = if v.is_empty() { None } else { Some(v.clone()) };
        }
        if let Some(v) = &self.device_label {
            plan.device_label = v.clone();
        }
        Ok(Some(plan))
    }

    fn is_empty(&self) -> bool {
        self.workload_command.is_none()
            && self.workload_args.is_none()
            && self.workload_env.is_empty()
            && self.workload_working_dir.is_none()
            && self.workload_input_manifest.is_none()
            && self.batch_size_b.is_none()
            && self.repetitions_r.is_none()
            && self.padding_seconds.is_none()
            && self.sampling_interval.is_none()
            && self.pre_run_hook.is_none()
            && self.device_label.is_none()
    }
}

/// Flag overrides for the [detector] section.
#[derive(Args, Clone, Default)]
struct DetectorOverrides {
    #[arg(long = "detector.trailing_window")]
    trailing_window: Option<usize>,
    #[arg(long = "detector.z_threshold")]
    z_threshold: Option<f64>,
    #[arg(long = "detector.min_history")]
    min_history: Option<usize>,
    #[arg(long = "detector.absolute_floor")]
    absolute_floor: Option<f64>,
}

impl DetectorOverrides {
    fn apply(&self, base: Option<DetectorConfig>) -> DetectorConfig {
        let mut cfg = base.unwrap_or_default();
        if let Some(v) = self.trailing_window {
            cfg.trailing_window = v;
        }
        if let Some(v) = self.z_threshold {
            cfg.z_threshold = v;
        }
        if let Some(v) = self.min_history {
            cfg.min_history = v;
        }
        if let Some(v) = self.absolute_floor {
            cfg.absolute_floor = Some(v);
        }
        cfg
    }
}

/// Flag overrides for the [spool] section.
#[derive(Args, Clone, Default)]
struct SpoolOverrides {
    #[arg(long = "spool.inbox")]
    inbox: Option<PathBuf>,
    #[arg(long = "spool.journal")]
    journal: Option<PathBuf>,
    #[arg(long = "spool.scan_interval_seconds")]
    scan_interval_seconds: Option<f64>,
    #[arg(long = "spool.stability_interval_seconds")]
    stability_interval_seconds: Option<f64>,
    #[arg(long = "spool.sink.kind")]
    sink_kind: Option<String>,
    #[arg(long = "spool.sink.target")]
    sink_target: Option<String>,
    #[arg(long = "spool.sink.max_attempts")]
    sink_max_attempts: Option<u32>,
    #[arg(long = "spool.sink.base_backoff_seconds")]
    sink_base_backoff_seconds: Option<f64>,
    #[arg(long = "spool.sink.multiplier")]
    sink_multiplier: Option<f64>,
    #[arg(long = "spool.sink.jitter")]
    sink_jitter: Option<f64>,
    #[arg(long = "spool.sink.retain_after_ack_seconds")]
    sink_retain_after_ack_seconds: Option<f64>,
}

impl SpoolOverrides {
    fn apply(&self, base: Option<SpoolSettings>) -> Result<Option<SpoolSettings>, Failure> {
        let mut settings = match (base, &self.inbox, &self.sink_target) {
            (Some(s), _, _) => s,
            (None, Some(inbox), Some(target)) => SpoolSettings {
                inbox: inbox.clone(),
                journal: None,
                scan_interval: std::time::Duration::from_secs(10),
                stability_interval: std::time::Duration::from_secs(2),
                sink: edgebench_core::spool::SinkConfig::directory(target.clone()),
            },
            (None, None, None) => return Ok(None),
            _ => {
                return Err(Failure::config(anyhow!(
                    "spool needs a [spool] section or both --spool.inbox and --spool.sink.target"
                )))
            }
        };
        if let Some(v) = &self.inbox {
            settings.inbox = v.clone();
        }
        if let Some(v) = &self.journal {
            settings.journal = Some(v.clone());
        }
        if let Some(v) = self.scan_interval_seconds {
            settings.scan_interval = std::time::Duration::from_secs_f64(v);
        }
        if let Some(v) = self.stability_interval_seconds {
            settings.stability_interval = std::time::Duration::from_secs_f64(v);
        }
        if let Some(v) = &self.sink_kind {
            settings.sink.kind = match v.as_str() {
                "directory-copy" => SinkKind::DirectoryCopy,
                "http-put" => SinkKind::HttpPut,
                other => {
                    return Err(Failure::config(anyhow!(
                        "--spool.sink.kind {other:?} is not directory-copy or http-put"
                    )))
                }
            };
        }
        if let Some(v) = &self.sink_target {
            settings.sink.target = v.clone();
        }
        if let Some(v) = self.sink_max_attempts {
            settings.sink.retry.max_attempts = v;
        }
        if let Some(v) = self.sink_base_backoff_seconds {
            settings.sink.retry.base_backoff = std::time::Duration::from_secs_f64(v);
        }
        if let Some(v) = self.sink_multiplier {
            settings.sink.retry.multiplier = v;
        }
        if let Some(v) = self.sink_jitter {
            settings.sink.retry.jitter = v;
        }
        if let Some(v) = self.sink_retain_after_ack_seconds {
            settings.sink.retain_after_ack = std::time::Duration::from_secs_f64(v);
        }
        Ok(Some(settings))
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for run artifacts and summaries.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    #[command(flatten)]
    plan: PlanOverrides,
}

#[derive(Subcommand)]
enum TdmsCommand {
    /// List groups, channels, sample counts and property names.
    Ls { file: PathBuf },
    /// Dump one channel as CSV on standard output.
    Dump {
        file: PathBuf,
        group: String,
        channel: String,
    },
}

#[derive(Args)]
struct RmsArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Sensor file to process.
    file: PathBuf,
    /// Samples per RMS window.
    #[arg(long)]
    window_len: usize,
    /// Points CSV destination (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Events CSV destination; events are discarded when absent.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Detector state file, loaded before and saved after.
    #[arg(long)]
    state: Option<PathBuf>,
    #[command(flatten)]
    detector: DetectorOverrides,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Points CSV ("-" for standard input).
    points: PathBuf,
    /// Events CSV destination (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Detector state file, loaded before and saved after.
    #[arg(long)]
    state: Option<PathBuf>,
    #[command(flatten)]
    detector: DetectorOverrides,
}

#[derive(Subcommand)]
enum SpoolCommand {
    /// Scan the inbox and forward files until interrupted.
    Run(SpoolRunArgs),
}

#[derive(Args)]
struct SpoolRunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Process everything currently visible, then exit.
    #[arg(long)]
    drain: bool,
    #[command(flatten)]
    spool: SpoolOverrides,
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Merge summaries into the per-metric table.
    Table {
        /// Summary JSON files (as written by bench).
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_parser = ["csv", "json"], default_value = "csv")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalized three-axis radar comparing devices.
    Radar {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time series: a recorded run's CPU trace (phases shaded) or an RMS
    /// points stream.
    Timeseries {
        /// A run directory containing samples.csv and meta.json.
        #[arg(long, conflicts_with = "points", required_unless_present = "points")]
        run_dir: Option<PathBuf>,
        /// An RMS points CSV instead of a run directory.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DevicesCommand {
    /// Print the device registry.
    Ls {
        /// Registry file; the built-in reference set when absent.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
}

/// Failure paired with its process exit code.
struct Failure {
    code: i32,
    error: anyhow::Error,
}

impl Failure {
    fn config(error: anyhow::Error) -> Failure {
        Failure { code: 2, error }
    }

    fn workload(error: anyhow::Error) -> Failure {
        Failure { code: 3, error }
    }
}

trait IntoFailure<T> {
    fn or_config(self) -> Result<T, Failure>;
    fn or_runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> IntoFailure<T> for Result<T, E> {
    fn or_config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::config(e.into()))
    }

    fn or_runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 1, error: e.into() })
    }
}

fn load_config(args: &ConfigArgs) -> Result<CliConfig, Failure> {
    let mut cfg = match &args.config {
        None => CliConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))
                .or_config()?;
            parse_config(&text).or_config()?
        }
    };
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = Some(dir.clone());
    }
    if let Some(level) = &args.log_level {
        cfg.log_level = Some(level.clone());
    }
    Ok(cfg)
}

fn init_logging(config_level: Option<&str>) {
    let mut builder = env_logger::Builder::new();
    builder.filter_level(log::LevelFilter::Info);
    if let Some(level) = config_level {
        builder.parse_filters(level);
    }
    if let Ok(env_level) = std::env::var("EDGEBENCH_LOG") {
        builder.parse_filters(&env_level);
    }
    if std::env::var_os("EDGEBENCH_NO_COLOR").is_some() {
        builder.write_style(env_logger::WriteStyle::Never);
    }
    let _ = builder.try_init();
}

fn write_text_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).or_runtime()?;
            }
            fs::write(path, text)
                .with_context(|| format!("writing {}", path.display()))
                .or_runtime()
        }
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    init_logging(cfg.log_level.as_deref());
    let plan = args
        .plan
        .apply(cfg.plan)?
        .ok_or_else(|| Failure::config(anyhow!("bench needs a [plan] section in the config")))?;
    plan.validate().or_config()?;

    let out_dir = args
        .out
        .or(cfg.output_dir)
        .unwrap_or_else(|| PathBuf::from("edgebench-out"));
    fs::create_dir_all(&out_dir).or_runtime()?;

    log::info!(
        "benchmarking {:?} on {}: B={} R={} padding={}s cadence={}s",
        plan.workload.command,
        plan.device_label,
        plan.batch_size_b,
        plan.repetitions_r,
        plan.padding_seconds,
        plan.sampling_interval
    );
    let records = run_plan(&plan, &out_dir.join("runs")).or_runtime()?;

    let (per_run, summary) =
        match summarize(&records, &plan.device_label, &MetricsConfig::default()) {
            Ok(ok) => ok,
            Err(MetricsError::AllRunsExcluded) => {
                for record in &records {
                    if let Some(f) = &record.failure {
                        eprintln!("run {}: {f}", record.run_index);
                    }
                }
                return Err(Failure::workload(anyhow!(
                    "all {} runs were excluded from aggregation",
                    records.len()
                )));
            }
            Err(e) => return Err(e).or_runtime(),
        };

    for excluded in &summary.excluded_runs {
        log::warn!("run {} excluded: {}", excluded.run_index, excluded.reason);
    }
    for m in &per_run {
        if m.idle_unstable {
            log::warn!("run {}: idle baseline unstable", m.run_index);
        }
    }

    let summaries = [summary];
    fs::write(out_dir.join("summary.csv"), emit_csv(&summaries)).or_runtime()?;
    fs::write(out_dir.join("summary.json"), emit_json(&summaries)).or_runtime()?;
    fs::write(
        out_dir.join("per_run.json"),
        serde_json::to_vec_pretty(&per_run).expect("metrics serialize"),
    )
    .or_runtime()?;
    print!("{}", emit_csv(&summaries));
    log::info!("artifacts in {}", out_dir.display());
    Ok(())
}

fn cmd_tdms(command: TdmsCommand) -> Result<(), Failure> {
    match command {
        TdmsCommand::Ls { file } => {
            let bytes = fs::read(&file)
                .with_context(|| format!("reading {}", file.display()))
                .or_runtime()?;
            let parsed = tdms::parse(&bytes).or_runtime()?;
            for line in tdms::hierarchy(&parsed) {
                println!("{line}");
            }
            Ok(())
        }
        TdmsCommand::Dump {
            file,
            group,
            channel,
        } => {
            let bytes = fs::read(&file)
                .with_context(|| format!("reading {}", file.display()))
                .or_runtime()?;
            let parsed = tdms::parse(&bytes).or_runtime()?;
            let values = tdms::channel_data(&parsed, &group, &channel).or_runtime()?;
            let mut out = String::from("index,value\n");
            for (i, v) in values.iter().enumerate() {
                out.push_str(&format!("{i},{v}\n"));
            }
            print!("{out}");
            Ok(())
        }
    }
}

fn load_state(path: Option<&Path>) -> Result<DetectorState, Failure> {
    match path {
        Some(p) if p.exists() => DetectorState::load(p).or_runtime(),
        _ => Ok(DetectorState::default()),
    }
}

fn cmd_rms(args: RmsArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    init_logging(cfg.log_level.as_deref());
    let detector = args.detector.apply(cfg.detector);
    detector.validate().or_config()?;
    if args.window_len == 0 {
        return Err(Failure::config(anyhow!("--window-len must be at least 1")));
    }

    let mut state = load_state(args.state.as_deref())?;
    let report = process_file(&args.file, args.window_len, &detector, &mut state).or_runtime()?;
    if let Some(path) = &args.state {
        state.save(path).or_runtime()?;
    }

    write_text_output(args.out.as_deref(), &points_to_csv(&report.points))?;
    if let Some(path) = &args.events {
        write_text_output(Some(path), &events_to_csv(&report.events))?;
    }
    log::info!(
        "{}: {} points, {} events, sha256 {}",
        report.source_file.display(),
        report.points.len(),
        report.events.len(),
        &report.source_checksum[..12]
    );
    Ok(())
}

fn cmd_detect(args: DetectArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    init_logging(cfg.log_level.as_deref());
    let detector = args.detector.apply(cfg.detector);
    detector.validate().or_config()?;

    let text = if args.points.as_os_str() == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf).or_runtime()?;
        buf
    } else {
        fs::read_to_string(&args.points)
            .with_context(|| format!("reading {}", args.points.display()))
            .or_runtime()?
    };
    let points = points_from_csv(&text).or_runtime()?;

    let events = match &args.state {
        None => {
            // stateless: each channel starts from an empty baseline
            let mut by_channel: BTreeMap<String, Vec<_>> = BTreeMap::new();
            for p in points {
                by_channel.entry(p.channel_id.clone()).or_default().push(p);
            }
            let mut events = Vec::new();
            for points in by_channel.values() {
                events.extend(detect_points(points, &detector).or_runtime()?);
            }
            events
        }
        Some(path) => {
            let mut state = load_state(Some(path))?;
            let events = state.observe_channel(&points, &detector).or_runtime()?;
            state.save(path).or_runtime()?;
            events
        }
    };

    write_text_output(args.out.as_deref(), &events_to_csv(&events))?;
    Ok(())
}

fn cmd_spool_run(args: SpoolRunArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    init_logging(cfg.log_level.as_deref());
    let settings = args
        .spool
        .apply(cfg.spool)?
        .ok_or_else(|| Failure::config(anyhow!("spool needs a [spool] section in the config")))?;
    let out_dir = cfg
        .output_dir
        .unwrap_or_else(|| PathBuf::from("edgebench-out"));
    fs::create_dir_all(&out_dir).or_runtime()?;

    let spooler_config = settings.into_spooler_config(&out_dir);
    let mut spooler = Spooler::open(spooler_config).or_runtime()?;
    let summary = if args.drain {
        spooler.drain().or_runtime()?
    } else {
        // runs until the process is killed; the journal makes that safe
        static NEVER: AtomicBool = AtomicBool::new(false);
        spooler.run(&NEVER).or_runtime()?
    };
    println!(
        "candidates {} enqueued {} attempts {} acked {} failed {} deleted {}",
        summary.candidates_seen,
        summary.enqueued,
        summary.forward_attempts,
        summary.acked,
        summary.failed,
        summary.sources_deleted
    );
    Ok(())
}

fn cmd_report(command: ReportCommand) -> Result<(), Failure> {
    match command {
        ReportCommand::Table { inputs, format, out } => {
            let summaries = read_summaries(&inputs)?;
            let text = match format.as_str() {
                "json" => emit_json(&summaries),
                _ => emit_csv(&summaries),
            };
            write_text_output(out.as_deref(), &text)
        }
        ReportCommand::Radar { inputs, out } => {
            let summaries = read_summaries(&inputs)?;
            let radar = normalize_radar(&summaries).or_runtime()?;
            for device in &radar.devices {
                log::info!("{}: area {:.4}", device.label, device.area);
            }
            write_text_output(out.as_deref(), &emit_radar_svg(&radar))
        }
        ReportCommand::Timeseries { run_dir, points, out } => {
            let svg = match (run_dir, points) {
                (Some(run_dir), _) => {
                    let record = read_run_record(&run_dir)
                        .with_context(|| format!("reading run record in {}", run_dir.display()))
                        .or_runtime()?;
                    emit_cpu_timeseries_svg(&record.samples, record.windows.as_ref())
                }
                (None, Some(points_path)) => {
                    let text = fs::read_to_string(&points_path)
                        .with_context(|| format!("reading {}", points_path.display()))
                        .or_runtime()?;
                    let points = points_from_csv(&text).or_runtime()?;
                    edgebench_core::report::emit_rms_timeseries_svg(&points)
                }
                (None, None) => unreachable!("clap enforces one input"),
            };
            write_text_output(out.as_deref(), &svg)
        }
    }
}

fn read_summaries(
    inputs: &[PathBuf],
) -> Result<Vec<edgebench_core::metrics::MetricsSummary>, Failure> {
    let mut summaries = Vec::new();
    for path in inputs {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .or_runtime()?;
        summaries.extend(parse_summary_json(&text).or_runtime()?);
    }
    Ok(summaries)
}

fn cmd_devices(command: DevicesCommand) -> Result<(), Failure> {
    match command {
        DevicesCommand::Ls { registry } => {
            let registry = match registry {
                None => DeviceRegistry::builtin(),
                Some(path) => DeviceRegistry::load(&path).or_config()?,
            };
            println!(
                "{:<18} {:<10} {:>5} {:>9} {:>9}  notes",
                "label", "soc", "cores", "clock", "memory"
            );
            for d in &registry.devices {
                println!(
                    "{:<18} {:<10} {:>5} {:>7}GHz {:>7}GB  {}",
                    d.label, d.soc, d.cores, d.clock_ghz, d.memory_gb, d.notes
                );
            }
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bench(args) => cmd_bench(args),
        Command::Tdms { command } => {
            init_logging(None);
            cmd_tdms(command)
        }
        Command::Rms(args) => cmd_rms(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Spool { command } => match command {
            SpoolCommand::Run(args) => cmd_spool_run(args),
        },
        Command::Report { command } => {
            init_logging(None);
            cmd_report(command)
        }
        Command::Devices { command } => {
            init_logging(None);
            cmd_devices(command)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            std::process::exit(failure.code);
        }
    }
}
