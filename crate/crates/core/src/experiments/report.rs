use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fieldio::{fmt_g17, write_text};

/// Metrics for one snapshot; `None` where a metric does not apply to the run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SnapshotMetrics {
    pub time: f64,
    /// `||W - Q||_2` over the grid.
    pub l2: Option<f64>,
    /// `||W - Q||_2 / ||Q||_2`.
    pub l2_relative: Option<f64>,
    pub linf: Option<f64>,
    /// `||term||_2` of the order-3 and order-5 correction terms of `Q`.
    pub correction_3: Option<f64>,
    pub correction_5: Option<f64>,
    pub purity_defect: Option<f64>,
    pub factorization_residual: Option<f64>,
    pub hermiticity_residual: Option<f64>,
    /// Distance (up to a global phase) between the factorized amplitude and the one synthesized from `C`.
    pub amplitude_error: Option<f64>,
}

const COLUMNS: [&str; 10] = [
    "time",
    "l2",
    "l2_relative",
    "linf",
    "correction_3",
    "correction_5",
    "purity_defect",
    "factorization_residual",
    "hermiticity_residual",
    "amplitude_error",
];

impl SnapshotMetrics {
    fn cells(&self) -> [Option<f64>; 10] {
        [
            Some(self.time),
            self.l2,
            self.l2_relative,
            self.linf,
            self.correction_3,
            self.correction_5,
            self.purity_defect,
            self.factorization_residual,
            self.hermiticity_residual,
            self.amplitude_error,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// `equivalence` or `theorem`.
    pub kind: String,
    pub snapshots: Vec<SnapshotMetrics>,
    pub config: ExperimentConfig,
    pub notes: Vec<String>,
}

fn json_number(v: f64) -> Value {
    // JSON has no NaN/inf; keep them visible as strings
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

/// Provenance block shared by every report.
pub fn provenance(config: &ExperimentConfig) -> Value {
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.solver.seed,
        "config": config.to_text(),
    })
}

impl ComparisonReport {
    pub fn check_finite(&self) -> Result<()> {
        for s in &self.snapshots {
            if s.cells().iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    time: s.time,
                    detail: format!("non-finite {} metric", self.kind),
                });
            }
        }
        Ok(())
    }

    /// One row per snapshot; missing metrics are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for s in &self.snapshots {
            let row: Vec<String> = s.cells().iter().map(|c| c.map(fmt_g17).unwrap_or_default()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut metrics = serde_json::Map::new();
        for (i, name) in COLUMNS.iter().enumerate() {
            let column: Vec<Value> = self
                .snapshots
                .iter()
                .map(|s| s.cells()[i].map_or(Value::Null, json_number))
                .collect();
            metrics.insert(name.to_string(), Value::Array(column));
        }
        json!({
            "kind": self.kind,
            "provenance": provenance(&self.config),
            "metrics": metrics,
            "notes": self.notes,
        })
    }

    /// Write `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        write_pair(dir, stem, &self.to_csv(), &self.to_json())
    }
}

pub(crate) fn write_pair(dir: &Path, stem: &str, csv: &str, meta: &Value) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write_text(&csv_path, csv)?;
    let mut text = serde_json::to_string_pretty(meta).expect("report metadata serializes");
    text.push('\n');
    write_text(&json_path, &text)?;
    Ok(vec![csv_path, json_path])
}

/// Metric-versus-value table from a convergence sweep.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub axis: String,
    /// Independent variable actually used (dt, dx or n_samples).
    pub values: Vec<f64>,
    /// `(metric name, one value per sweep point)`.
    pub metrics: Vec<(String, Vec<f64>)>,
    /// Least-squares log-log slope per metric.
    pub slopes: Vec<(String, f64)>,
    pub config: ExperimentConfig,
}

impl SweepTable {
    pub fn slope(&self, metric: &str) -> Option<f64> {
        self.slopes.iter().find(|(n, _)| n == metric).map(|(_, s)| *s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.axis.clone();
        for (name, _) in &self.metrics {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&fmt_g17(*v));
            for (_, col) in &self.metrics {
                out.push(',');
                out.push_str(&fmt_g17(col[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let slopes: serde_json::Map<String, Value> =
            self.slopes.iter().map(|(n, s)| (n.clone(), json_number(*s))).collect();
        json!({
            "kind": "sweep",
            "axis": self.axis,
            "values": self.values.iter().map(|v| json_number(*v)).collect::<Vec<_>>(),
            "slopes": slopes,
            "provenance": provenance(&self.config),
        })
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        write_pair(dir, stem, &self.to_csv(), &self.to_json())
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
