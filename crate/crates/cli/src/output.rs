//! CSV, manifest, and plot stub emission.
//!
//! All numeric formatting is locale-free and deterministic: the same
//! resolved config and seed always produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use beamtrack_core::design::{estimate_kappa, overhead_reduction};
use beamtrack_core::harness::{MetricSeries, RateSummary, SamplePath};

use crate::config::FileConfig;

/// Shortest round-trip decimal; exponent form outside a readable range.
pub fn fmt(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_finite() && (1e-4..1e7).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn write_rows(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())
}

/// Time series of one metric, one column per tracker.
fn write_metric(
    path: &Path,
    series: &[MetricSeries],
    metric: impl Fn(&MetricSeries) -> &Vec<f64>,
) -> std::io::Result<()> {
    let mut header = vec!["t_s".to_string()];
    header.extend(series.iter().map(|s| s.label.clone()));
    let n = series.first().map_or(0, |s| s.t.len());
    write_rows(path, &header, (0..n).map(|i| {
        let mut row = vec![fmt(series[0].t[i])];
        row.extend(series.iter().map(|s| fmt(metric(s)[i])));
        row
    }))
}

/// Nearest-rank quantile over the sorted per-tick SNR samples.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[idx]
}

fn write_cdf(path: &Path, series: &[MetricSeries]) -> std::io::Result<()> {
    let mut header = vec!["p".to_string()];
    header.extend(series.iter().map(|s| s.label.clone()));
    write_rows(path, &header, (0..=1000).map(|i| {
        let p = i as f64 / 1000.0;
        let mut row = vec![fmt(p)];
        row.extend(series.iter().map(|s| fmt(quantile(&s.snr_samples, p))));
        row
    }))
}

fn write_summary(path: &Path, series: &[MetricSeries]) -> std::io::Result<()> {
    let header: Vec<String> = [
        "label",
        "snr_avg_db",
        "time_avg_mse_rad2",
        "diverged_fraction",
        "kappa_hat",
        "overhead_reduction",
    ]
    .map(String::from)
    .to_vec();
    write_rows(path, &header, series.iter().map(|s| {
        let kappa = estimate_kappa(&s.slope_pairs);
        vec![
            s.label.clone(),
            fmt(s.snr_avg_db),
            fmt(s.time_averaged_mse()),
            fmt(s.diverged_fraction),
            fmt(kappa),
            fmt(overhead_reduction(kappa)),
        ]
    }))
}

/// Everything derived from one variant's metric series.
pub fn write_series_dir(dir: &Path, series: &[MetricSeries]) -> std::io::Result<()> {
    write_metric(&dir.join("mse.csv"), series, |s| &s.mse)?;
    write_metric(&dir.join("snr.csv"), series, |s| &s.snr_inst)?;
    write_cdf(&dir.join("cdf_snr.csv"), series)?;
    write_summary(&dir.join("summary.csv"), series)
}

/// One realization: truth next to every tracker's estimate and realized SNR
/// in dB (floored six decades under the noise-free peak to stay finite).
pub fn write_path_csv(dir: &Path, path: &SamplePath, rho: f64) -> std::io::Result<()> {
    let truth_elev = path.truth.first().is_some_and(|s| s.elevation.is_some());
    // A linear array never estimates elevation, so its columns stay out even
    // when the true path carries a second plane.
    let track_elev: Vec<bool> = path
        .tracks
        .iter()
        .map(|(_, pts, _)| pts.first().is_some_and(|p| p.estimate.elevation().is_some()))
        .collect();
    let mut header = vec!["t_s".to_string(), "phi_rad".to_string()];
    if truth_elev {
        header.push("theta_rad".to_string());
    }
    for ((label, _, _), &elev) in path.tracks.iter().zip(&track_elev) {
        header.push(format!("{label}_phi_rad"));
        if elev {
            header.push(format!("{label}_theta_rad"));
        }
        header.push(format!("{label}_snr_db"));
    }
    let floor = rho * 1e-6;
    write_rows(&dir.join("path.csv"), &header, (0..path.t.len()).map(|i| {
        let truth = path.truth[i].angles();
        let mut row = vec![fmt(path.t[i]), fmt(truth.azimuth())];
        if truth_elev {
            row.push(fmt(truth.elevation().unwrap_or(0.0)));
        }
        for ((_, points, gamma), &elev) in path.tracks.iter().zip(&track_elev) {
            row.push(fmt(points[i].estimate.azimuth()));
            if elev {
                row.push(fmt(points[i].estimate.elevation().unwrap_or(0.0)));
            }
            row.push(fmt(10.0 * gamma[i].max(floor).log10()));
        }
        row
    }))
}

pub fn write_manifest(dir: &Path, file: &FileConfig) -> std::io::Result<()> {
    fs::write(dir.join("manifest.toml"), file.to_manifest_toml())
}

pub struct AggregateRow {
    pub variant: String,
    pub label: String,
    pub snr_avg_db: f64,
    pub time_avg_mse: f64,
    pub diverged_fraction: f64,
    pub kappa_hat: f64,
    pub rates: Option<RateSummary>,
}

/// Cross-variant roll-up at the preset root. Rate columns appear only when
/// some variant carries design context.
pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> std::io::Result<()> {
    let with_rates = rows.iter().any(|r| r.rates.is_some());
    let mut header: Vec<String> = [
        "variant",
        "label",
        "snr_avg_db",
        "time_avg_mse_rad2",
        "diverged_fraction",
        "kappa_hat",
        "overhead_reduction",
    ]
    .map(String::from)
    .to_vec();
    if with_rates {
        for c in [
            "avg_rate_bps_hz",
            "outage_rate_bps_hz",
            "effective_avg_rate_bps_hz",
            "effective_outage_rate_bps_hz",
        ] {
            header.push(c.to_string());
        }
    }
    write_rows(path, &header, rows.iter().map(|r| {
        let mut row = vec![
            r.variant.clone(),
            r.label.clone(),
            fmt(r.snr_avg_db),
            fmt(r.time_avg_mse),
            fmt(r.diverged_fraction),
            fmt(r.kappa_hat),
            fmt(overhead_reduction(r.kappa_hat)),
        ];
        if with_rates {
            match &r.rates {
                Some(s) => {
                    row.push(fmt(s.avg_rate));
                    row.push(fmt(s.outage_rate));
                    row.push(fmt(s.effective_avg_rate));
                    row.push(fmt(s.effective_outage_rate));
                }
                None => row.extend(std::iter::repeat(String::new()).take(4)),
            }
        }
        row
    }))
}

const PLOT_STUB: &str = r#"#!/usr/bin/env python3
"""Draws the CSVs written by `beamtrack simulate`.

Walks this directory for mse.csv, snr.csv, cdf_snr.csv, and path.csv and
renders one PNG next to each. matplotlib is needed only by this script;
the simulator itself has no plotting dependency.
"""
import csv
import os
import sys

KNOWN = ("mse.csv", "snr.csv", "cdf_snr.csv", "path.csv")


def columns(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header, data = rows[0], rows[1:]
    return header, [[float(r[i]) for r in data] for i in range(len(header))]


def main():
    try:
        import matplotlib.pyplot as plt
    except ImportError:
        sys.exit("matplotlib is not installed; install it to use this script")
    base = os.path.dirname(os.path.abspath(__file__)) or "."
    targets = []
    for root, _dirs, files in os.walk(base):
        targets += [os.path.join(root, n) for n in files if n in KNOWN]
    if not targets:
        sys.exit("no beamtrack CSVs found next to this script")
    for path in sorted(targets):
        header, cols = columns(path)
        fig, ax = plt.subplots()
        for name, col in zip(header[1:], cols[1:]):
            ax.plot(cols[0], col, label=name, linewidth=1)
        ax.set_xlabel(header[0])
        ax.set_title(os.path.relpath(path, base))
        if path.endswith("mse.csv"):
            ax.set_yscale("log")
        ax.legend(fontsize=7)
        fig.tight_layout()
        out = path[:-4] + ".png"
        fig.savefig(out, dpi=150)
        print("wrote", out)


if __name__ == "__main__":
    main()
"#;

pub fn write_plot_stub(dir: &Path) -> std::io::Result<()> {
    fs::write(dir.join("plot.py"), PLOT_STUB)
}
