use serde::{Deserialize, Serialize};

use super::protocol::{run_protocol, ProtocolConfig};
use super::{EditConfig, EditContext, EditorKind};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub lambda_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambda_grid: vec![0.0, 0.1, 1.0, 10.0, 50.0],
            k_grid: vec![1, 2, 3, 5],
        }
    }
}

/// One `(λ, K)` cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub editor: EditorKind,
    pub lambda: f64,
    pub k: usize,
    pub success_rate: f64,
    pub dd_mean: f64,
    pub dd_std: f64,
    pub acc_mean: f64,
    pub acc_std: f64,
}

/// Full-factorial λ × K runs of one protocol. Only GRE+ uses the K grid;
/// the other editors run with `K = 1`.
pub fn sweep<T: Scalar>(
    model: &Model<T>,
    ctx: &EditContext<T>,
    base: &EditConfig,
    grid: &SweepConfig,
    protocol: &ProtocolConfig,
) -> Result<Vec<SweepRow>> {
    if grid.lambda_grid.is_empty() || grid.k_grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must be non-empty".into()));
    }
    let ks: Vec<usize> = match base.editor {
        EditorKind::GrePlus => grid.k_grid.clone(),
        _ => vec![1],
    };
    let mut rows = Vec::with_capacity(grid.lambda_grid.len() * ks.len());
    for &lambda in &grid.lambda_grid {
        for &k in &ks {
            let config = EditConfig {
                lambda,
                k,
                ..base.clone()
            };
            let report = run_protocol(model, ctx, &config, None, protocol)?;
            rows.push(SweepRow {
                editor: base.editor,
                lambda,
                k,
                success_rate: report.success_rate,
                dd_mean: report.dd.mean,
                dd_std: report.dd.std,
                acc_mean: report.acc.mean,
                acc_std: report.acc.std,
            });
        }
    }
    Ok(rows)
}
