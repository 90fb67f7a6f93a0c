use serde::{Deserialize, Serialize};

use super::{accuracy_from_logits, mix_seed, GradScope, Mode, Model};
use crate::diff::NodeSelection;
use crate::error::{Error, Result};
use crate::graph::PreparedGraph;
use crate::scalar::Scalar;

/// Full-batch gradient-descent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: Model<T>,
    /// Evaluation-mode mean training loss after each epoch.
    pub losses: Vec<f64>,
    /// Training accuracy after each epoch.
    pub accuracies: Vec<f64>,
}

/// Plain full-batch gradient descent on the mean cross-entropy over every
/// node of `train_graph` (the train-only subgraph in the inductive setting).
///
/// Dropout is active in the update pass with a per-epoch seed derived from
/// the model seed; the recorded curve uses evaluation mode.
pub fn train_base<T: Scalar>(
    model: &Model<T>,
    train_graph: &PreparedGraph<T>,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    if !(config.lr >= 0.0) {
        return Err(Error::InvalidArgument(format!("lr must be >= 0, got {}", config.lr)));
    }
    let mut model = model.clone();
    let nodes: Vec<usize> = (0..train_graph.num_nodes()).collect();
    let selection = NodeSelection::mean(nodes.clone(), train_graph.labels());
    let lr = T::lit(config.lr);
    let mut losses = Vec::with_capacity(config.epochs);
    let mut accuracies = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mode = Mode::Train {
            seed: mix_seed(model.seed(), epoch as u64 + 1),
        };
        let (loss, grad) = model.loss_and_grad(train_graph, &selection, mode, GradScope::All)?;
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: loss.as_f64(),
            });
        }
        model.descend(lr, &grad)?;

        let logits = model.logits(train_graph)?;
        let (eval_loss, _) = crate::diff::softmax_cross_entropy(&logits, &selection)?;
        if !eval_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: eval_loss.as_f64(),
            });
        }
        losses.push(eval_loss.as_f64());
        accuracies.push(accuracy_from_logits(&logits, train_graph.labels(), &nodes));
        log::debug!("epoch {epoch}: loss {:.6}", eval_loss.as_f64());
    }
    Ok(TrainOutcome {
        model,
        losses,
        accuracies,
    })
}
