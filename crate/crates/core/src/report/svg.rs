//! Self-contained SVG output: text-based, diffable in tests, and free of
//! rendering dependencies. Data series are the only `<polygon>`/`<polyline>`
//! elements; frames and grids use `<path>` and `<line>`.

use std::fmt::Write;

use super::{RadarData, RADAR_AXES};
use crate::harness::PhaseWindows;
use crate::sampler::SampleLog;
use crate::shm::RmsPoint;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

fn svg_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One filled polygon per device on three axes 120 degrees apart, with the
/// area annotated in the legend.
pub fn emit_radar_svg(radar: &RadarData) -> String {
    let width = 440.0;
    let center = (220.0, 190.0);
    let r = 140.0;
    let legend_y0 = 356.0;
    let height = legend_y0 + 20.0 * radar.devices.len() as f64 + 8.0;

    // axis unit vectors: up, lower right, lower left
    let axis = |i: usize| -> (f64, f64) {
        let angle = -std::f64::consts::FRAC_PI_2 + i as f64 * 2.0 * std::f64::consts::PI / 3.0;
        (angle.cos(), angle.sin())
    };
    let point = |i: usize, v: f64| -> (f64, f64) {
        let (dx, dy) = axis(i);
        (center.0 + dx * r * v, center.1 + dy * r * v)
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");

    // rings and spokes
    for ring in [0.25, 0.5, 0.75, 1.0] {
        let pts: Vec<(f64, f64)> = (0..3).map(|i| point(i, ring)).collect();
        let _ = writeln!(
            out,
            "<path d=\"M {:.2} {:.2} L {:.2} {:.2} L {:.2} {:.2} Z\" fill=\"none\" \
             stroke=\"#cccccc\" stroke-dasharray=\"3 3\"/>",
            pts[0].0, pts[0].1, pts[1].0, pts[1].1, pts[2].0, pts[2].1
        );
    }
    for i in 0..3 {
        let (x, y) = point(i, 1.0);
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{y:.2}\" stroke=\"#999999\"/>",
            center.0, center.1
        );
        let (lx, ly) = point(i, 1.16);
        let _ = writeln!(
            out,
            "<text x=\"{lx:.2}\" y=\"{ly:.2}\" text-anchor=\"middle\">{}</text>",
            RADAR_AXES[i]
        );
    }

    for (k, device) in radar.devices.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = (0..3)
            .map(|i| {
                let (x, y) = point(i, device.values[i].clamp(0.0, 1.0));
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.25\" stroke=\"{color}\" \
             stroke-width=\"1.5\"/>",
            pts.join(" ")
        );
    }

    for (k, device) in radar.devices.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let y = legend_y0 + 20.0 * k as f64;
        let _ = writeln!(
            out,
            "<rect x=\"24\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{color}\"/>",
            y - 10.0
        );
        let note = if device.clamped_negative {
            " [cpu clamped at 0]"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "<text x=\"42\" y=\"{y:.2}\">{} (area {:.3}){note}</text>",
            svg_escape(&device.label),
            device.area
        );
    }
    out.push_str("</svg>\n");
    out
}

/// CPU percentage over time with the three measurement phases shaded.
pub fn emit_cpu_timeseries_svg(log: &SampleLog, windows: Option<&PhaseWindows>) -> String {
    let width = 720.0;
    let height = 300.0;
    let (ml, mr, mt, mb) = (52.0, 16.0, 20.0, 42.0);
    let plot_w = width - ml - mr;
    let plot_h = height - mt - mb;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");

    // time domain: whatever the windows and samples together span
    let mut t_min = u64::MAX;
    let mut t_max = u64::MIN;
    if let Some(w) = windows {
        t_min = t_min.min(w.pre_pad.start);
        t_max = t_max.max(w.post_pad.end);
    }
    if let (Some(first), Some(last)) = (log.records.first(), log.records.last()) {
        t_min = t_min.min(first.t);
        t_max = t_max.max(last.t);
    }
    if t_min >= t_max {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">no data</text>",
            ml + plot_w / 2.0,
            mt + plot_h / 2.0
        );
        out.push_str("</svg>\n");
        return out;
    }
    let span = (t_max - t_min) as f64;
    let x_of = |t: u64| ml + (t - t_min) as f64 / span * plot_w;
    let y_of = |pct: f64| mt + (1.0 - pct.clamp(0.0, 100.0) / 100.0) * plot_h;

    if let Some(w) = windows {
        let shades = [
            ("phase-prepad", "#d9e8f5", w.pre_pad),
            ("phase-active", "#fbe3c8", w.active),
            ("phase-postpad", "#d9f5dc", w.post_pad),
        ];
        for (class, fill, window) in shades {
            let x = x_of(window.start);
            let wdt = x_of(window.end) - x;
            let _ = writeln!(
                out,
                "<rect class=\"{class}\" x=\"{x:.2}\" y=\"{mt:.2}\" width=\"{wdt:.2}\" \
                 height=\"{plot_h:.2}\" fill=\"{fill}\"/>"
            );
        }
    }

    // axes and horizontal grid
    for pct in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let y = y_of(pct);
        let _ = writeln!(
            out,
            "<line x1=\"{ml:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>",
            ml + plot_w
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{pct}</text>",
            ml - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<line x1=\"{ml:.2}\" y1=\"{mt:.2}\" x2=\"{ml:.2}\" y2=\"{:.2}\" stroke=\"#333333\"/>",
        mt + plot_h
    );
    let _ = writeln!(
        out,
        "<line x1=\"{ml:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#333333\"/>",
        mt + plot_h,
        ml + plot_w,
        mt + plot_h
    );

    // x labels: seconds since the plot origin, wall clock at the origin
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let t = t_min + (span * frac) as u64;
        let x = x_of(t);
        let _ = writeln!(
            out,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{:.1}s</text>",
            mt + plot_h + 16.0,
            (t - t_min) as f64 / 1e9
        );
    }
    let origin_wall = log.wall_clock_anchor.wall_at(t_min);
    let _ = writeln!(
        out,
        "<text x=\"{ml:.2}\" y=\"{:.2}\">start {} / cpu %</text>",
        mt + plot_h + 32.0,
        origin_wall.format("%Y-%m-%d %H:%M:%S UTC")
    );

    if !log.records.is_empty() {
        let pts: Vec<String> = log
            .records
            .iter()
            .map(|r| format!("{:.2},{:.2}", x_of(r.t), y_of(r.cpu_pct)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            pts.join(" "),
            PALETTE[0]
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One polyline per channel of an RMS series over wall-clock time.
pub fn emit_rms_timeseries_svg(points: &[RmsPoint]) -> String {
    let width = 720.0;
    let height = 300.0;
    let (ml, mr, mt, mb) = (64.0, 16.0, 20.0, 42.0);
    let plot_w = width - ml - mr;
    let plot_h = height - mt - mb;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    if points.is_empty() {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">no data</text>",
            ml + plot_w / 2.0,
            mt + plot_h / 2.0
        );
        out.push_str("</svg>\n");
        return out;
    }

    let t_min = points.iter().map(|p| p.window_start).min().unwrap();
    let t_max = points.iter().map(|p| p.window_start).max().unwrap();
    let span = (t_max - t_min).num_nanoseconds().unwrap_or(i64::MAX).max(1) as f64;
    let v_max = points.iter().fold(0.0f64, |m, p| m.max(p.rms)).max(1e-12);
    let x_of = |t: chrono::DateTime<chrono::Utc>| {
        ml + (t - t_min).num_nanoseconds().unwrap_or(0) as f64 / span * plot_w
    };
    let y_of = |v: f64| mt + (1.0 - (v / v_max).clamp(0.0, 1.0)) * plot_h;

    for frac in [0.0, 0.5, 1.0] {
        let y = y_of(v_max * frac);
        let _ = writeln!(
            out,
            "<line x1=\"{ml:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>",
            ml + plot_w
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{:.4}</text>",
            ml - 6.0,
            y + 4.0,
            v_max * frac
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{ml:.2}\" y=\"{:.2}\">rms from {}</text>",
        mt + plot_h + 32.0,
        t_min.format("%Y-%m-%d %H:%M:%S UTC")
    );

    let mut channels: Vec<&str> = points.iter().map(|p| p.channel_id.as_str()).collect();
    channels.sort_unstable();
    channels.dedup();
    for (k, channel) in channels.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = points
            .iter()
            .filter(|p| p.channel_id == *channel)
            .map(|p| format!("{:.2},{:.2}", x_of(p.window_start), y_of(p.rms)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"{color}\">{}</text>",
            ml + 8.0,
            mt + 14.0 + 14.0 * k as f64,
            svg_escape(channel)
        );
    }
    out.push_str("</svg>\n");
    out
}
