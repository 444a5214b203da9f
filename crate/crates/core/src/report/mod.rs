//! Comparison artifacts across devices: per-metric tables, the normalized
//! three-axis radar with its area ordering, and CPU time-series plots.

mod svg;

pub use svg::{emit_cpu_timeseries_svg, emit_radar_svg, emit_rms_timeseries_svg};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricsSummary;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no summaries given")]
    NoSummaries,
    #[error("device {device}: metric {metric} is missing or not finite")]
    MissingMetric { device: String, metric: String },
    #[error("registry: {0}")]
    Registry(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One row of the device registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub label: String,
    pub soc: String,
    pub cores: u32,
    pub clock_ghz: f64,
    pub memory_gb: f64,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceRegistry {
    #[serde(default, rename = "device")]
    pub devices: Vec<DeviceProfile>,
}

impl DeviceRegistry {
    /// The two reference platforms this tool ships with.
    pub fn builtin() -> DeviceRegistry {
        DeviceRegistry {
            devices: vec![
                DeviceProfile {
                    label: "beaglebone-ai64".into(),
                    soc: "TDA4VM".into(),
                    cores: 2,
                    clock_ghz: 2.0,
                    memory_gb: 4.0,
                    notes: "ARM Cortex-A72, PowerVR Rogue 8XE GE8430".into(),
                },
                DeviceProfile {
                    label: "raspberry-pi-4".into(),
                    soc: "BCM2711".into(),
                    cores: 4,
                    clock_ghz: 1.5,
                    memory_gb: 4.0,
                    notes: "ARM Cortex-A72, VideoCore VI".into(),
                },
            ],
        }
    }

    pub fn from_toml(text: &str) -> Result<DeviceRegistry, ReportError> {
        let registry: DeviceRegistry =
            toml::from_str(text).map_err(|e| ReportError::Registry(e.to_string()))?;
        for d in &registry.devices {
            if d.cores < 1 {
                return Err(ReportError::Registry(format!("{}: zero cores", d.label)));
            }
            if !(d.clock_ghz > 0.0) || !(d.memory_gb > 0.0) {
                return Err(ReportError::Registry(format!(
                    "{}: clock and memory must be positive",
                    d.label
                )));
            }
        }
        Ok(registry)
    }

    pub fn load(path: &Path) -> Result<DeviceRegistry, ReportError> {
        DeviceRegistry::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("registry serializes")
    }
}

/// The fixed radar axes, in emission order.
pub const RADAR_AXES: [&str; 3] = ["cpu_delta_pct", "latency_seconds", "mem_peak_bytes"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarDevice {
    pub label: String,
    /// Per-axis values normalized into [0, 1] by the per-axis maximum.
    pub values: [f64; 3],
    pub area: f64,
    /// True when a negative CPU delta was clamped to zero for plotting.
    pub clamped_negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarData {
    pub devices: Vec<RadarDevice>,
}

/// Area of the triangle with vertices at distances v along three axes 120
/// degrees apart: (sqrt(3)/4) * (v1*v2 + v2*v3 + v3*v1).
pub fn radar_area(v: [f64; 3]) -> f64 {
    (3.0f64.sqrt() / 4.0) * (v[0] * v[1] + v[1] * v[2] + v[2] * v[0])
}

/// Normalizes each device's metric means by the per-axis maximum across the
/// compared set, so the worst device touches the rim on every axis.
/// Negative CPU deltas are clamped to zero for the plot only, flagged.
pub fn normalize_radar(summaries: &[MetricsSummary]) -> Result<RadarData, ReportError> {
    if summaries.is_empty() {
        return Err(ReportError::NoSummaries);
    }
    let mut raws = Vec::with_capacity(summaries.len());
    for s in summaries {
        let raw = [s.cpu_delta_pct.mean, s.latency_seconds.mean, s.mem_peak_bytes.mean];
        for (axis, value) in RADAR_AXES.iter().zip(raw) {
            if !value.is_finite() {
                return Err(ReportError::MissingMetric {
                    device: s.device_label.clone(),
                    metric: axis.to_string(),
                });
            }
        }
        let clamped_negative = raw[0] < 0.0;
        raws.push((s.device_label.clone(), [raw[0].max(0.0), raw[1], raw[2]], clamped_negative));
    }
    let mut max = [0.0f64; 3];
    for (_, raw, _) in &raws {
        for i in 0..3 {
            max[i] = max[i].max(raw[i]);
        }
    }
    let devices = raws
        .into_iter()
        .map(|(label, raw, clamped_negative)| {
            let mut values = [0.0; 3];
            for i in 0..3 {
                values[i] = if max[i] > 0.0 { raw[i] / max[i] } else { 0.0 };
            }
            RadarDevice {
                label,
                values,
                area: radar_area(values),
                clamped_negative,
            }
        })
        .collect();
    Ok(RadarData { devices })
}

fn sorted<'a>(summaries: &'a [MetricsSummary]) -> Vec<&'a MetricsSummary> {
    let mut refs: Vec<&MetricsSummary> = summaries.iter().collect();
    refs.sort_by(|a, b| a.device_label.cmp(&b.device_label));
    refs
}

/// `device,metric,mean,std,min,max,n_runs` rows, ordered by device label
/// then metric name. Floats print in shortest round-trip form, so equal
/// inputs give byte-identical output and parsing recovers full precision.
pub fn emit_csv(summaries: &[MetricsSummary]) -> String {
    let mut out = String::from("device,metric,mean,std,min,max,n_runs\n");
    for s in sorted(summaries) {
        let rows = [
            (RADAR_AXES[0], &s.cpu_delta_pct),
            (RADAR_AXES[1], &s.latency_seconds),
            (RADAR_AXES[2], &s.mem_peak_bytes),
        ];
        for (metric, stats) in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.device_label, metric, stats.mean, stats.std, stats.min, stats.max, s.n_runs
            ));
        }
    }
    out
}

/// The same table as a structured document.
pub fn emit_json(summaries: &[MetricsSummary]) -> String {
    let refs = sorted(summaries);
    serde_json::to_string_pretty(&refs).expect("summaries serialize")
}

pub fn parse_summary_json(text: &str) -> Result<Vec<MetricsSummary>, ReportError> {
    // accept either a single summary object or a list
    if let Ok(one) = serde_json::from_str::<MetricsSummary>(text) {
        return Ok(vec![one]);
    }
    serde_json::from_str(text).map_err(|e| ReportError::Registry(format!("summary JSON: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricStats;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn stats(mean: f64) -> MetricStats {
        MetricStats {
            mean,
            std: 0.0,
            min: mean,
            max: mean,
        }
    }

    pub(super) fn summary(label: &str, cpu: f64, latency: f64, mem: f64) -> MetricsSummary {
        MetricsSummary {
            device_label: label.into(),
            n_runs: 10,
            cpu_delta_pct: stats(cpu),
            latency_seconds: stats(latency),
            mem_peak_bytes: stats(mem),
            excluded_runs: vec![],
        }
    }

    #[test]
    fn area_equilateral_and_degenerate() {
        assert_relative_eq!(
            radar_area([1.0, 1.0, 1.0]),
            3.0 * 3.0f64.sqrt() / 4.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(radar_area([1.0, 1.0, 1.0]), 1.299, epsilon = 1e-3);
        assert_eq!(radar_area([0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn single_device_normalizes_to_unit() {
        let radar = normalize_radar(&[summary("solo", 30.0, 60.0, 5e8)]).unwrap();
        assert_eq!(radar.devices[0].values, [1.0, 1.0, 1.0]);
    }

    #[test]
    fn reference_comparison_reproduces_published_shape() {
        // means observed for the two reference devices: the four-core board
        // wins on CPU and memory, ties on latency, and gets the smaller area
        let rpi = summary("rpi4", 29.96, 67.73, 548.44e6);
        let bb = summary("bb-ai64", 53.02, 67.56, 691.43e6);
        let radar = normalize_radar(&[rpi, bb]).unwrap();

        let rpi = &radar.devices[0];
        assert_relative_eq!(rpi.values[0], 0.565, epsilon = 1e-3);
        assert_relative_eq!(rpi.values[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(rpi.values[2], 0.793, epsilon = 1e-3);

        let bb = &radar.devices[1];
        assert_relative_eq!(bb.values[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(bb.values[1], 0.9975, epsilon = 1e-3);
        assert_relative_eq!(bb.values[2], 1.0, epsilon = 1e-12);

        assert_relative_eq!(rpi.area, 0.782, epsilon = 1e-3);
        assert_relative_eq!(bb.area, 1.297, epsilon = 1e-3);
        assert!(rpi.area < bb.area, "smaller area means better efficiency");
    }

    #[test]
    fn all_zero_metrics_are_zero_not_nan() {
        let radar = normalize_radar(&[summary("z", 0.0, 0.0, 0.0)]).unwrap();
        assert_eq!(radar.devices[0].values, [0.0, 0.0, 0.0]);
        assert_eq!(radar.devices[0].area, 0.0);
    }

    #[test]
    fn negative_cpu_delta_clamps_only_in_plot() {
        let s = summary("neg", -2.0, 10.0, 1e6);
        let radar = normalize_radar(&[s.clone()]).unwrap();
        assert_eq!(radar.devices[0].values[0], 0.0);
        assert!(radar.devices[0].clamped_negative);
        // the table keeps the truth
        assert!(emit_csv(&[s]).contains("neg,cpu_delta_pct,-2,"));
    }

    #[test]
    fn missing_metric_is_an_error() {
        let mut s = summary("nan", 1.0, 1.0, 1.0);
        s.latency_seconds.mean = f64::NAN;
        assert!(matches!(
            normalize_radar(&[s]),
            Err(ReportError::MissingMetric { .. })
        ));
        assert!(matches!(normalize_radar(&[]), Err(ReportError::NoSummaries)));
    }

    #[test]
    fn csv_shape_and_determinism() {
        let a = summary("alpha", 1.0, 2.0, 3.0);
        let b = summary("beta", 4.0, 5.0, 6.0);
        let forward = emit_csv(&[a.clone(), b.clone()]);
        let reversed = emit_csv(&[b, a]);
        assert_eq!(forward, reversed, "emission order must not matter");
        let lines: Vec<&str> = forward.lines().collect();
        assert_eq!(lines.len(), 1 + 3 + 3);
        assert_eq!(lines[0], "device,metric,mean,std,min,max,n_runs");
        assert!(lines[1].starts_with("alpha,cpu_delta_pct,"));
        assert!(lines[4].starts_with("beta,"));
    }

    #[test]
    fn csv_round_trips_full_precision() {
        // awkward values that expose any formatting truncation
        let s = summary("p", 29.96, 1.0 / 3.0, 548.44e6 + 0.125);
        let csv_text = emit_csv(&[s.clone()]);
        let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
        let mut seen = 0;
        for row in reader.records() {
            let row = row.unwrap();
            let mean: f64 = row[2].parse().unwrap();
            let expected = match &row[1] {
                "cpu_delta_pct" => s.cpu_delta_pct.mean,
                "latency_seconds" => s.latency_seconds.mean,
                "mem_peak_bytes" => s.mem_peak_bytes.mean,
                other => panic!("unexpected metric {other}"),
            };
            assert_eq!(mean.to_bits(), expected.to_bits());
            seen += 1;
        }
        assert_eq!(seen, 3);
    }

    #[test]
    fn json_round_trips() {
        let a = summary("alpha", 1.5, 2.5, 3.5);
        let text = emit_json(&[a.clone()]);
        let back = parse_summary_json(&text).unwrap();
        assert_eq!(back, vec![a]);
    }

    #[test]
    fn builtin_registry_matches_reference_platforms() {
        let reg = DeviceRegistry::builtin();
        let bb = reg.devices.iter().find(|d| d.soc == "TDA4VM").unwrap();
        assert_eq!((bb.cores, bb.clock_ghz, bb.memory_gb), (2, 2.0, 4.0));
        let rpi = reg.devices.iter().find(|d| d.soc == "BCM2711").unwrap();
        assert_eq!((rpi.cores, rpi.clock_ghz, rpi.memory_gb), (4, 1.5, 4.0));
    }

    #[test]
    fn registry_toml_round_trip_and_strictness() {
        let reg = DeviceRegistry::builtin();
        let text = reg.to_toml();
        assert_eq!(DeviceRegistry::from_toml(&text).unwrap(), reg);
        assert!(DeviceRegistry::from_toml("[[device]]\nlabel = \"x\"\nsoc = \"s\"\ncores = 1\nclock_ghz = 1.0\nmemory_gb = 1.0\nbogus = 3\n").is_err());
        assert!(DeviceRegistry::from_toml("[[device]]\nlabel = \"x\"\nsoc = \"s\"\ncores = 0\nclock_ghz = 1.0\nmemory_gb = 1.0\n").is_err());
    }

    proptest! {
        // the area grows when any component grows, strictly if another is positive
        #[test]
        fn area_monotone(v in [0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0], bump in 0.01f64..0.5) {
            for i in 0..3 {
                let mut w = v;
                w[i] = (w[i] + bump).min(1.0);
                if w[i] > v[i] {
                    let before = radar_area(v);
                    let after = radar_area(w);
                    prop_assert!(after >= before);
                    if v[(i + 1) % 3] > 0.0 || v[(i + 2) % 3] > 0.0 {
                        prop_assert!(after > before);
                    }
                }
            }
        }

        // rescaling one raw metric across all devices changes nothing
        #[test]
        fn normalization_scale_invariant(
            cpus in [1e-3f64..100.0, 1e-3f64..100.0],
            alpha in 1e-3f64..1e3
        ) {
            let base = [
                summary("a", cpus[0], 10.0, 100.0),
                summary("b", cpus[1], 20.0, 200.0),
            ];
            let scaled = [
                summary("a", cpus[0] * alpha, 10.0, 100.0),
                summary("b", cpus[1] * alpha, 20.0, 200.0),
            ];
            let r1 = normalize_radar(&base).unwrap();
            let r2 = normalize_radar(&scaled).unwrap();
            for (d1, d2) in r1.devices.iter().zip(&r2.devices) {
                for i in 0..3 {
                    prop_assert!((d1.values[i] - d2.values[i]).abs() < 1e-9);
                }
            }
        }

        // dominated devices never get the larger area
        #[test]
        fn dominance_preserves_area_order(
            a in [0.1f64..50.0, 0.1f64..50.0, 0.1f64..50.0],
            slack in [1.0f64..3.0, 1.0f64..3.0, 1.0f64..3.0]
        ) {
            let worse = [a[0] * slack[0], a[1] * slack[1], a[2] * slack[2]];
            let radar = normalize_radar(&[
                summary("better", a[0], a[1], a[2]),
                summary("worse", worse[0], worse[1], worse[2]),
            ]).unwrap();
            prop_assert!(radar.devices[0].area <= radar.devices[1].area + 1e-12);
        }
    }
}
