//! CSV and metrics output.
//!
//! Floats are written with Rust's shortest round-trip formatting, so identical
//! runs produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use super::sim::{PairLogRow, RunLog, RunMetrics};
use crate::error::{Error, Result};

/// Column order of the per-pair CSV files.
pub const PAIR_HEADER: [&str; 21] = [
    "t",
    "L_true",
    "alpha_true",
    "phi_true",
    "L_filt",
    "phi_filt",
    "h1",
    "h2",
    "h3",
    "h4",
    "v_nom",
    "w_nom",
    "v_safe",
    "w_safe",
    "status",
    "visible",
    "phi_raw",
    "L_raw",
    "active_set",
    "L_d",
    "alpha_d",
];

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn pair_record(row: &PairLogRow) -> Vec<String> {
    let active = row
        .active_set
        .iter()
        .map(|k| (k + 1).to_string())
        .collect::<Vec<_>>()
        .join("|");
    vec![
        num(row.t),
        num(row.truth.l),
        num(row.truth.alpha),
        num(row.truth.phi),
        opt(row.l_filtered),
        opt(row.phi_filtered),
        num(row.h[0]),
        num(row.h[1]),
        num(row.h[2]),
        num(row.h[3]),
        num(row.u_nominal.v),
        num(row.u_nominal.omega),
        num(row.u_applied.v),
        num(row.u_applied.omega),
        row.status.as_str().to_string(),
        (row.visible as u8).to_string(),
        opt(row.phi_raw),
        opt(row.l_raw),
        active,
        num(row.setpoint.l_d),
        num(row.setpoint.alpha_d),
    ]
}

pub fn pair_csv_path(dir: &Path, pair: usize) -> PathBuf {
    dir.join(format!("pair_{pair}.csv"))
}

pub fn metrics_path(dir: &Path) -> PathBuf {
    dir.join("metrics.json")
}

/// Writes one CSV per pair plus `metrics.json` into `dir`.
pub fn export_csv(log: &RunLog, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (i, rows) in log.pairs.iter().enumerate() {
        let path = pair_csv_path(dir, i + 1);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(PAIR_HEADER)?;
        for row in rows {
            w.write_record(pair_record(row))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let path = metrics_path(dir);
    write_metrics(&log.metrics, &path)?;
    written.push(path);
    Ok(written)
}

pub fn write_metrics(metrics: &RunMetrics, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
