//! `report.json`, `summary.csv` and `curves.csv` writers.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::protocol::RunReport;
use crate::error::{Error, Result};

/// One row of `curves.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: usize,
    pub metric: String,
    pub value: f64,
    pub arch: String,
}

#[derive(Serialize)]
struct SummaryRow {
    editor: String,
    target: String,
    success: bool,
    steps: usize,
    acc_before: f64,
    acc_after: f64,
    dd: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    }
}

pub fn write_csv<S: Serialize>(path: &Path, rows: impl IntoIterator<Item = S>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl RunReport {
    /// Per-step curves: the cumulative DD of a sequential run, plus the
    /// edit-averaged target loss, training loss and Grad_RMSE when recorded
    /// (averaged over the edits still running at each step).
    pub fn curve_rows(&self, arch: &str) -> Vec<CurveRow> {
        let mut rows = Vec::new();
        if let Some(curve) = &self.cumulative_dd {
            rows.extend(curve.iter().enumerate().map(|(i, &value)| CurveRow {
                step: i + 1,
                metric: "cumulative_dd".into(),
                value,
                arch: arch.to_string(),
            }));
        }
        let curves: Vec<_> = self.records.iter().filter_map(|r| r.outcome.curves.as_ref()).collect();
        let longest = curves.iter().map(|c| c.target_loss.len()).max().unwrap_or(0);
        let metrics: [(&str, fn(&super::EditCurves) -> &Vec<f64>); 3] = [
            ("target_loss", |c| &c.target_loss),
            ("train_loss", |c| &c.train_loss),
            ("grad_rmse", |c| &c.grad_rmse),
        ];
        for (name, pick) in metrics {
            for step in 0..longest {
                let vals: Vec<f64> = curves.iter().filter_map(|c| pick(c).get(step).copied()).collect();
                rows.push(CurveRow {
                    step,
                    metric: name.into(),
                    value: vals.iter().sum::<f64>() / vals.len() as f64,
                    arch: arch.to_string(),
                });
            }
        }
        rows
    }
}

/// Writes `report.json` and `summary.csv` into `dir`.
pub fn write_report(dir: impl AsRef<Path>, report: &RunReport) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::json(&json_path, e))?;
    fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))?;
    let editor = report.editor.to_string();
    let rows = report.records.iter().map(|r| SummaryRow {
        editor: editor.clone(),
        target: r
            .targets
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(" "),
        success: r.outcome.success,
        steps: r.outcome.steps_used,
        acc_before: r.outcome.acc_before,
        acc_after: r.outcome.acc_after,
        dd: r.dd,
    });
    write_csv(&dir.join("summary.csv"), rows)
}

pub fn write_curves_csv(path: impl AsRef<Path>, rows: &[CurveRow]) -> Result<()> {
    write_csv(path.as_ref(), rows)
}
