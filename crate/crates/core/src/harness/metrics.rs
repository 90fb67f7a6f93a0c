use serde::{Deserialize, Serialize};

use crate::diff::GradientVector;
use crate::error::Result;
use crate::scalar::Scalar;

/// `‖g_a − g_b‖₂`. The name follows common usage; no per-coordinate averaging.
pub fn grad_rmse<T: Scalar>(g_a: &GradientVector<T>, g_b: &GradientVector<T>) -> Result<T> {
    Ok(g_a.sub(g_b)?.norm())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

pub fn mean_std(values: impl IntoIterator<Item = f64>) -> MeanStd {
    let values: Vec<f64> = values.into_iter().collect();
    let count = values.len();
    if count == 0 {
        return MeanStd::default();
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
    MeanStd {
        mean,
        std: var.sqrt(),
        count,
    }
}
