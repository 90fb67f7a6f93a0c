use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::grad_rmse;
use super::protocol::misclassified;
use super::report::CurveRow;
use super::EditContext;
use crate::diff::NodeSelection;
use crate::error::{Error, Result};
use crate::models::{mix_seed, GradScope, Mode, Model};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotivationConfig {
    pub steps: usize,
    pub num_targets: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for MotivationConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            num_targets: 50,
            step_size: 0.01,
            seed: 0,
        }
    }
}

/// Target-averaged traces for one architecture; index `s` is the state after `s` GD steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotivationCurves {
    pub arch: String,
    pub targets: Vec<usize>,
    pub target_loss: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub grad_rmse: Vec<f64>,
    pub note: Option<String>,
}

impl MotivationCurves {
    pub fn rows(&self) -> Vec<CurveRow> {
        let metrics = [
            ("grad_rmse", &self.grad_rmse),
            ("train_loss", &self.train_loss),
            ("target_loss", &self.target_loss),
        ];
        metrics
            .iter()
            .flat_map(|(name, values)| {
                values.iter().enumerate().map(move |(step, &value)| CurveRow {
                    step,
                    metric: name.to_string(),
                    value,
                    arch: self.arch.clone(),
                })
            })
            .collect()
    }
}

/// Plain GD on the target loss for a fixed number of steps (no success
/// check), recording training loss, target loss and their gradient distance.
/// Targets are misclassified validation nodes of each model, falling back to
/// all validation nodes when the model makes no validation error.
pub fn run_motivation<T: Scalar>(
    models: &[(String, &Model<T>)],
    ctx: &EditContext<T>,
    config: &MotivationConfig,
) -> Result<Vec<MotivationCurves>> {
    if config.num_targets == 0 {
        return Err(Error::InvalidArgument("num_targets must be >= 1".into()));
    }
    models
        .iter()
        .map(|(arch, model)| motivation_for(arch, model, ctx, config))
        .collect()
}

fn motivation_for<T: Scalar>(
    arch: &str,
    model: &Model<T>,
    ctx: &EditContext<T>,
    config: &MotivationConfig,
) -> Result<MotivationCurves> {
    let mut pool = misclassified(model, ctx)?;
    let mut note = None;
    if pool.is_empty() {
        pool = ctx.valid_nodes();
        note = Some("no misclassified validation node; using all validation nodes".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x3071));
    let targets: Vec<usize> = (0..config.num_targets)
        .map(|_| pool[rand::Rng::random_range(&mut rng, 0..pool.len())])
        .collect();
    let traces = targets
        .par_iter()
        .map(|&t| trace(model, ctx, t, config))
        .collect::<Result<Vec<_>>>()?;
    let n = traces.len() as f64;
    let average = |pick: fn(&[f64; 3]) -> f64| -> Vec<f64> {
        (0..=config.steps)
            .map(|s| traces.iter().map(|tr| pick(&tr[s])).sum::<f64>() / n)
            .collect()
    };
    Ok(MotivationCurves {
        arch: arch.to_string(),
        targets,
        target_loss: average(|r| r[0]),
        train_loss: average(|r| r[1]),
        grad_rmse: average(|r| r[2]),
        note,
    })
}

fn trace<T: Scalar>(
    model: &Model<T>,
    ctx: &EditContext<T>,
    target: usize,
    config: &MotivationConfig,
) -> Result<Vec<[f64; 3]>> {
    let selection = NodeSelection::mean(vec![target], ctx.full.labels());
    let step = T::lit(config.step_size);
    let mut m = model.clone();
    let mut out = Vec::with_capacity(config.steps + 1);
    for s in 0..=config.steps {
        let (l_tg, g_tg) = m.loss_and_grad(&ctx.full, &selection, Mode::Eval, GradScope::Editable)?;
        let (l_train, g_train) = ctx.train_gradient(&m)?;
        if !l_tg.is_finite() || !l_train.is_finite() {
            return Err(Error::NonFinite(format!("motivation target {target}, step {s}")));
        }
        out.push([l_tg.as_f64(), l_train.as_f64(), grad_rmse(&g_train, &g_tg)?.as_f64()]);
        if s < config.steps {
            m.descend(step, &g_tg)?;
        }
    }
    Ok(out)
}
