//! CSV table and plot-script emission.

use std::fmt::Write as _;
use std::path::Path;

use pima::metrics::AggregateSummary;

use crate::error::{ExpError, ExpResult};
use crate::presets::Figure;

pub const CSV_COLUMNS: [&str; 13] = [
    "scheduler",
    "n_users",
    "lambda_total",
    "seed_count",
    "frames",
    "eta_mean",
    "eta_ci95",
    "latency_ms_mean",
    "latency_ms_ci95",
    "delivered",
    "dropped",
    "stable",
    "traffic_checksum",
];

/// `x` with six significant digits, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..6).contains(&exp) {
        return format!("{x:.5e}");
    }
    let s = format!("{:.*}", (5 - exp).max(0) as usize, x);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn to_csv(rows: &[AggregateSummary]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{:016x}",
            r.scheduler.name(),
            r.n_users,
            sig6(r.lambda_total),
            r.seed_count,
            r.frames,
            sig6(r.eta_mean),
            sig6(r.eta_ci95),
            sig6(r.latency_ms_mean),
            sig6(r.latency_ms_ci95),
            r.delivered,
            r.dropped,
            r.stable,
            r.traffic_checksum,
        );
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> ExpResult<()> {
    std::fs::write(path, contents).map_err(|source| ExpError::Io { path: path.to_path_buf(), source })
}

/// Matplotlib script drawing the figure's metric against `Λ` from the CSV
/// at `csv_path`, one series per scheduler present in `rows`.
pub fn emit_plot_script(rows: &[AggregateSummary], figure: Figure, csv_path: &Path) -> ExpResult<String> {
    if rows.is_empty() {
        return Err(ExpError::Plot("the result table is empty".into()));
    }
    let (column, ylabel) = if figure.shows_latency() {
        ("latency_ms_mean", "Avg. Packet Latency [ms]")
    } else {
        ("eta_mean", "Avg. Frame Efficiency")
    };
    let mut series: Vec<&str> = Vec::new();
    for r in rows {
        if !series.contains(&r.scheduler.name()) {
            series.push(r.scheduler.name());
        }
    }
    let labels: Vec<String> = series
        .iter()
        .map(|s| {
            let label = s.parse::<pima::SchedulerKind>().map(|k| k.label()).unwrap_or(s);
            format!("    \"{s}\": \"{label}\",")
        })
        .collect();
    let yscale = if figure == Figure::Fig4 || (figure.shows_latency() && series.contains(&"SALOHA")) {
        "ax.set_yscale(\"log\")\n"
    } else {
        ""
    };
    Ok(format!(
        r#"#!/usr/bin/env python3
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV = sys.argv[1] if len(sys.argv) > 1 else {csv:?}
OUT = sys.argv[2] if len(sys.argv) > 2 else "{figure}.png"
SERIES = {{
{labels}
}}

rows = list(csv.DictReader(open(CSV)))
missing = {{"scheduler", "lambda_total", "{column}"}} - set(rows[0].keys() if rows else [])
if not rows or missing:
    sys.exit(f"{{CSV}}: no rows or missing columns {{sorted(missing)}}")

fig, ax = plt.subplots(figsize=(6, 4))
for name, label in SERIES.items():
    pts = sorted((float(r["lambda_total"]), float(r["{column}"])) for r in rows if r["scheduler"] == name)
    if pts:
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
{yscale}ax.set_xlabel("Traffic intensity $\\Lambda$")
ax.set_ylabel("{ylabel}")
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(OUT, dpi=150)
"#,
        csv = csv_path.display().to_string(),
        labels = labels.join("\n"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pima::SchedulerKind;

    fn row(s: SchedulerKind, lambda: f64) -> AggregateSummary {
        AggregateSummary {
            scheduler: s,
            n_users: 5,
            lambda_total: lambda,
            seed_count: 1,
            frames: 10,
            eta_mean: 1.0 / 1.1,
            eta_ci95: f64::NAN,
            latency_ms_mean: 0.14375,
            latency_ms_ci95: f64::NAN,
            delivered: 3,
            dropped: 0,
            mean_queue_len: 0.0,
            stable: true,
            traffic_checksum: 0xabc,
        }
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(1.0 / 1.1), "0.909091");
        assert_eq!(sig6(3.2470853), "3.24709");
        assert_eq!(sig6(0.01), "0.01");
        assert_eq!(sig6(41.3398422759), "41.3398");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(f64::NAN), "NaN");
    }

    #[test]
    fn csv_layout() {
        let csv = to_csv(&[row(SchedulerKind::Sgfeo, 0.5)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "SGFEO,5,0.5,1,10,0.909091,NaN,0.14375,NaN,3,0,true,0000000000000abc"
        );
        assert!(to_csv(&[]).lines().count() == 1);
    }

    #[test]
    fn plot_labels_and_series() {
        let rows: Vec<_> = [SchedulerKind::Tdma, SchedulerKind::Pima, SchedulerKind::Gfeo, SchedulerKind::Sgfeo]
            .into_iter()
            .map(|s| row(s, 0.1))
            .collect();
        let script = emit_plot_script(&rows, Figure::Fig2, Path::new("fig2.csv")).unwrap();
        assert!(script.contains("\"Avg. Frame Efficiency\""));
        assert_eq!(script.matches("\": \"").count(), 4);
        assert!(script.contains("\"SGFEO\": \"S-GFEO\""));
        let rows: Vec<_> = SchedulerKind::ALL.into_iter().map(|s| row(s, 0.1)).collect();
        let script = emit_plot_script(&rows, Figure::Fig3, Path::new("fig3.csv")).unwrap();
        assert!(script.contains("\"Avg. Packet Latency [ms]\""));
        assert_eq!(script.matches("\": \"").count(), 5);
        assert!(matches!(emit_plot_script(&[], Figure::Fig2, Path::new("x.csv")), Err(ExpError::Plot(_))));
    }
}
