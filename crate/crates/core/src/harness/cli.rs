//! Implementation of the `compare` and `sweep` subcommands, kept in the
//! library so the acceptance tests can drive them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ScenarioConfig;
use super::export::export_csv;
use super::sim::{run_scenario, RunMetrics};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairComparison {
    pub pair: usize,
    pub fov_violation_steps_on: usize,
    pub fov_violation_steps_off: usize,
    pub blind_steps_on: usize,
    pub blind_steps_off: usize,
    pub min_h_on: f64,
    pub min_h_off: f64,
    pub first_violation_time_off: Option<f64>,
    pub filter_active_steps_on: usize,
    pub infeasible_steps_on: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub pairs: Vec<PairComparison>,
    pub on_clean: bool,
    pub off_clean: bool,
}

impl CompareSummary {
    pub fn from_metrics(on: &RunMetrics, off: &RunMetrics) -> Self {
        let pairs = on
            .pairs
            .iter()
            .zip(&off.pairs)
            .map(|(a, b)| PairComparison {
                pair: a.pair,
                fov_violation_steps_on: a.fov_violation_steps,
                fov_violation_steps_off: b.fov_violation_steps,
                blind_steps_on: a.blind_steps,
                blind_steps_off: b.blind_steps,
                min_h_on: a.min_barrier(),
                min_h_off: b.min_barrier(),
                first_violation_time_off: b.first_violation_time,
                filter_active_steps_on: a.filter_active_steps,
                infeasible_steps_on: a.infeasible_steps,
            })
            .collect();
        Self {
            pairs,
            on_clean: on.is_clean(),
            off_clean: off.is_clean(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("pair  viol_on  viol_off  blind_on  blind_off  min_h_on  min_h_off  active_on\n");
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{:>4}  {:>7}  {:>8}  {:>8}  {:>9}  {:>8.4}  {:>9.4}  {:>9}",
                p.pair,
                p.fov_violation_steps_on,
                p.fov_violation_steps_off,
                p.blind_steps_on,
                p.blind_steps_off,
                p.min_h_on,
                p.min_h_off,
                p.filter_active_steps_on
            );
        }
        out
    }
}

/// Runs the scenario with the safety filter on and off (same seeds) and writes
/// `filter_on/`, `filter_off/` and `summary.json` under `out`.
pub fn compare(cfg: &ScenarioConfig, out: &Path) -> Result<(RunMetrics, RunMetrics, CompareSummary)> {
    let mut on_cfg = cfg.clone();
    on_cfg.safety_filter_enabled = true;
    let mut off_cfg = cfg.clone();
    off_cfg.safety_filter_enabled = false;
    let on = run_scenario(&on_cfg)?;
    let off = run_scenario(&off_cfg)?;
    export_csv(&on, &out.join("filter_on"))?;
    export_csv(&off, &out.join("filter_off"))?;
    let summary = CompareSummary::from_metrics(&on.metrics, &off.metrics);
    let path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok((on.metrics, off.metrics, summary))
}

/// Replaces the value at a dotted key path (`safety.psi_max`, `gamma.2`-style
/// indices address array elements).
pub fn set_path(doc: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (depth, key) in keys.iter().enumerate() {
        let last = depth + 1 == keys.len();
        node = match node {
            toml::Value::Table(table) => {
                if last {
                    table.insert((*key).to_string(), value);
                    return Ok(());
                }
                table
                    .entry((*key).to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()))
            }
            toml::Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::config(format!("'{key}' in '{path}' is not an array index")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::config(format!("index {idx} out of range in '{path}'")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::config(format!("'{path}' does not address a table or array"))),
        };
    }
    Err(Error::config("empty parameter path"))
}

/// Parses a command-line value as a TOML literal, falling back to a string.
pub fn parse_value(text: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

/// Fully materialized scenario (defaults included) as a TOML tree.
pub fn scenario_document(cfg: &ScenarioConfig) -> toml::Value {
    toml::Value::try_from(cfg).expect("scenario serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: String,
    pub dir: PathBuf,
    pub metrics: RunMetrics,
}

pub fn sweep(cfg: &ScenarioConfig, param: &str, values: &[String], out: &Path) -> Result<Vec<SweepPoint>> {
    let base = scenario_document(cfg);
    let mut points = Vec::with_capacity(values.len());
    for raw in values {
        let mut doc = base.clone();
        set_path(&mut doc, param, parse_value(raw))?;
        let point_cfg = ScenarioConfig::from_toml_value(doc)?;
        let log = run_scenario(&point_cfg)?;
        let dir = out.join(format!("{param}={raw}"));
        export_csv(&log, &dir)?;
        points.push(SweepPoint {
            value: raw.clone(),
            dir,
            metrics: log.metrics,
        });
    }
    let path = out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "value",
        "pair",
        "fov_violation_steps",
        "blind_steps",
        "infeasible_steps",
        "filter_active_steps",
        "min_h",
    ])?;
    for p in &points {
        for m in &p.metrics.pairs {
            w.write_record([
                p.value.clone(),
                m.pair.to_string(),
                m.fov_violation_steps.to_string(),
                m.blind_steps.to_string(),
                m.infeasible_steps.to_string(),
                m.filter_active_steps.to_string(),
                format!("{}", m.min_barrier()),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(points)
}
