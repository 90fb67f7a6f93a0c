//! Editors, editing protocols, metrics and the experiment drivers built on them.

mod metrics;
mod motivation;
mod protocol;
mod report;
mod sweep;

pub use metrics::{grad_rmse, mean_std, MeanStd};
pub use motivation::{run_motivation, MotivationConfig, MotivationCurves};
pub use protocol::{
    misclassified, run_batch, run_independent, run_protocol, run_sequential, EditRecord, ProtocolConfig,
    ProtocolKind, RunReport,
};
pub use report::{write_csv, write_curves_csv, write_report, CurveRow};
pub use sweep::{sweep, SweepConfig, SweepRow};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diff::{GradientVector, NodeSelection};
use crate::error::{Error, Result};
use crate::graph::{induce_training_subgraph, Graph, PreparedGraph, SplitAssignment};
use crate::models::{accuracy_from_logits, argmax, GradScope, Mode, Model};
use crate::rewire::{gre_plus_rewire, gre_rewire, AnchorGradientSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EditorKind {
    Gd,
    Gre,
    GrePlus,
}

impl EditorKind {
    pub const ALL: [EditorKind; 3] = [EditorKind::Gd, EditorKind::Gre, EditorKind::GrePlus];

    pub fn needs_anchors(self) -> bool {
        self != EditorKind::Gd
    }
}

impl fmt::Display for EditorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EditorKind::Gd => "gd",
            EditorKind::Gre => "gre",
            EditorKind::GrePlus => "gre+",
        })
    }
}

impl FromStr for EditorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Ok(EditorKind::Gd),
            "gre" => Ok(EditorKind::Gre),
            "gre+" | "gre_plus" | "greplus" => Ok(EditorKind::GrePlus),
            other => Err(Error::InvalidArgument(format!(
                "unknown editor '{other}' (expected gd, gre or gre+)"
            ))),
        }
    }
}

impl TryFrom<String> for EditorKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EditorKind> for String {
    fn from(k: EditorKind) -> String {
        k.to_string()
    }
}

/// Editor settings shared by every edit of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EditConfig {
    pub editor: EditorKind,
    pub step_size: f64,
    pub max_steps: usize,
    pub lambda: f64,
    pub k: usize,
    pub tolerance: f64,
    /// Record per-step target loss, training loss and Grad_RMSE.
    pub record_curves: bool,
}

impl Default for EditConfig {
    fn default() -> Self {
        Self {
            editor: EditorKind::GrePlus,
            step_size: 0.01,
            max_steps: 100,
            lambda: 0.0,
            k: 3,
            tolerance: 1e-10,
            record_curves: false,
        }
    }
}

impl EditConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return bad(format!("step_size must be >= 0, got {}", self.step_size));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be >= 1".into());
        }
        crate::rewire::RewireConfig {
            lambda: self.lambda,
            k: self.k,
            tolerance: self.tolerance,
        }
        .validate()
    }

    /// Subset count actually used by the editor (GD ignores anchors, GRE uses one row).
    pub fn effective_k(&self) -> usize {
        match self.editor {
            EditorKind::GrePlus => self.k,
            _ => 1,
        }
    }
}

/// One edit: the targets to correct and their desired labels.
///
/// A single-target request is the usual case; several targets form a batch
/// whose loss is the mean cross-entropy over its members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRequest {
    pub targets: Vec<usize>,
    pub desired_labels: Vec<usize>,
    pub max_steps: usize,
    pub step_size: f64,
}

impl EditRequest {
    pub fn single(target: usize, desired_label: usize, config: &EditConfig) -> Self {
        Self::batch(vec![target], vec![desired_label], config)
    }

    pub fn batch(targets: Vec<usize>, desired_labels: Vec<usize>, config: &EditConfig) -> Self {
        Self {
            targets,
            desired_labels,
            max_steps: config.max_steps,
            step_size: config.step_size,
        }
    }

    fn validate(&self, num_nodes: usize, num_classes: usize) -> Result<()> {
        if self.targets.is_empty() || self.targets.len() != self.desired_labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} targets with {} labels",
                self.targets.len(),
                self.desired_labels.len()
            )));
        }
        if let Some(&t) = self.targets.iter().find(|&&t| t >= num_nodes) {
            return Err(Error::InvalidArgument(format!("target {t} >= {num_nodes} nodes")));
        }
        if let Some(&y) = self.desired_labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidArgument(format!("label {y} >= {num_classes} classes")));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be >= 1".into()));
        }
        if !(self.step_size >= 0.0) {
            return Err(Error::InvalidArgument("step_size must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-step traces of one edit, indexed by step (state before the update).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EditCurves {
    pub target_loss: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub grad_rmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub success: bool,
    pub steps_used: usize,
    /// Test accuracy in percent.
    pub acc_before: f64,
    pub acc_after: f64,
    pub train_loss_before: f64,
    pub train_loss_after: f64,
    /// Fraction of batch members predicted correctly at the end.
    pub member_success: f64,
    pub diagnostic: Option<String>,
    pub curves: Option<EditCurves>,
}

impl EditOutcome {
    /// `acc_before − acc_after` in percentage points.
    pub fn dd(&self) -> f64 {
        self.acc_before - self.acc_after
    }
}

/// The full graph used for editing and evaluation, the train-only subgraph
/// used for training losses and anchors, and the split tying them together.
#[derive(Debug, Clone)]
pub struct EditContext<T> {
    pub full: PreparedGraph<T>,
    pub train: PreparedGraph<T>,
    pub split: SplitAssignment,
    /// `index_map[local train id] = full-graph id`.
    pub index_map: Vec<usize>,
}

impl<T: Scalar> EditContext<T> {
    pub fn new(graph: Graph<T>, split: SplitAssignment) -> Result<Self> {
        let induced = induce_training_subgraph(&graph, &split)?;
        Ok(Self {
            full: PreparedGraph::new(graph),
            train: PreparedGraph::new(induced.graph),
            split,
            index_map: induced.index_map,
        })
    }

    pub fn test_nodes(&self) -> Vec<usize> {
        self.split.test_nodes()
    }

    pub fn valid_nodes(&self) -> Vec<usize> {
        self.split.valid_nodes()
    }

    /// Test accuracy in percent.
    pub fn test_accuracy(&self, model: &Model<T>) -> Result<f64> {
        let logits = model.logits(&self.full)?;
        Ok(100.0 * accuracy_from_logits(&logits, self.full.labels(), &self.test_nodes()))
    }

    /// Mean cross-entropy over the train-only subgraph (evaluation mode).
    pub fn train_loss(&self, model: &Model<T>) -> Result<T> {
        model.loss(&self.train, &self.train_selection(), Mode::Eval)
    }

    /// Training-loss gradient on the editable coordinates.
    pub fn train_gradient(&self, model: &Model<T>) -> Result<(T, GradientVector<T>)> {
        model.loss_and_grad(&self.train, &self.train_selection(), Mode::Eval, GradScope::Editable)
    }

    fn train_selection(&self) -> NodeSelection<T> {
        NodeSelection::mean((0..self.train.num_nodes()).collect(), self.train.labels())
    }

    /// Anchors on the train-only subgraph, subsets reported in full-graph ids.
    pub fn capture_anchors(&self, model: &Model<T>, k: usize, seed: u64) -> Result<AnchorGradientSet<T>> {
        Ok(crate::rewire::capture_anchors(model, &self.train, k, seed)?.remap_nodes(&self.index_map))
    }
}

/// Applies the editor's rewiring to a target gradient.
pub fn rewire_gradient<T: Scalar>(
    config: &EditConfig,
    anchors: Option<&AnchorGradientSet<T>>,
    g_tg: GradientVector<T>,
) -> Result<GradientVector<T>> {
    let lambda = T::lit(config.lambda);
    match config.editor {
        EditorKind::Gd => Ok(g_tg),
        EditorKind::Gre => {
            let anchors = require_anchors(anchors)?;
            if anchors.k() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "GRE uses a single anchor row, got K = {}",
                    anchors.k()
                )));
            }
            Ok(gre_rewire(&g_tg, &anchors.rows()[0], lambda)?.gradient)
        }
        EditorKind::GrePlus => {
            let anchors = require_anchors(anchors)?;
            Ok(gre_plus_rewire(&g_tg, &anchors.row_refs(), lambda, T::lit(config.tolerance))?.gradient)
        }
    }
}

fn require_anchors<T>(anchors: Option<&AnchorGradientSet<T>>) -> Result<&AnchorGradientSet<T>> {
    anchors.ok_or_else(|| Error::InvalidArgument("GRE / GRE+ editors need anchor gradients".into()))
}

/// Runs one edit from `model` and returns the edited copy.
///
/// Success is checked before every step, so an already-correct request costs
/// zero steps. Numerical failures inside the loop end the edit as a failure
/// with a diagnostic; argument errors are returned.
pub fn edit_once<T: Scalar>(
    model: &Model<T>,
    ctx: &EditContext<T>,
    config: &EditConfig,
    anchors: Option<&AnchorGradientSet<T>>,
    request: &EditRequest,
) -> Result<(Model<T>, EditOutcome)> {
    if config.editor.needs_anchors() {
        require_anchors(anchors)?.check_model(model)?;
    }
    edit_with_stale_anchors(model, ctx, config, anchors, request)
}

/// `edit_once` without the anchor fingerprint check, for chains that keep
/// the anchors of an earlier model.
pub(crate) fn edit_with_stale_anchors<T: Scalar>(
    model: &Model<T>,
    ctx: &EditContext<T>,
    config: &EditConfig,
    anchors: Option<&AnchorGradientSet<T>>,
    request: &EditRequest,
) -> Result<(Model<T>, EditOutcome)> {
    config.validate()?;
    request.validate(ctx.full.num_nodes(), model.arch().output_dim)?;
    if config.editor.needs_anchors() {
        require_anchors(anchors)?;
    }
    let selection = NodeSelection::mean_with_labels(request.targets.clone(), request.desired_labels.clone());
    let step = T::lit(request.step_size);
    let acc_before = ctx.test_accuracy(model)?;
    let train_loss_before = ctx.train_loss(model)?.as_f64();

    let mut edited = model.clone();
    let mut curves = config.record_curves.then(EditCurves::default);
    let mut steps_used = 0;
    let mut diagnostic = None;
    let mut logits = edited.logits(&ctx.full)?;
    let correct = |logits: &crate::linalg::Matrix<T>| {
        request
            .targets
            .iter()
            .zip(&request.desired_labels)
            .filter(|&(&t, &y)| argmax(logits.row(t)) == y)
            .count()
    };
    while correct(&logits) < request.targets.len() && steps_used < request.max_steps {
        match edit_step(&edited, ctx, config, anchors, &selection, curves.as_mut()) {
            Ok(g) => {
                edited.descend(step, &g)?;
                steps_used += 1;
            }
            Err(e) if e.is_numerical() => {
                diagnostic = Some(format!("step {steps_used}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
        logits = edited.logits(&ctx.full)?;
        if !logits.as_slice().iter().all(|v| v.is_finite()) {
            diagnostic = Some(format!("step {steps_used}: non-finite logits"));
            break;
        }
    }
    let n_correct = if diagnostic.is_some() { 0 } else { correct(&logits) };
    let outcome = EditOutcome {
        success: n_correct == request.targets.len(),
        steps_used,
        acc_before,
        acc_after: 100.0 * accuracy_from_logits(&logits, ctx.full.labels(), &ctx.test_nodes()),
        train_loss_before,
        train_loss_after: ctx.train_loss(&edited)?.as_f64(),
        member_success: n_correct as f64 / request.targets.len() as f64,
        diagnostic,
        curves,
    };
    Ok((edited, outcome))
}

fn edit_step<T: Scalar>(
    model: &Model<T>,
    ctx: &EditContext<T>,
    config: &EditConfig,
    anchors: Option<&AnchorGradientSet<T>>,
    selection: &NodeSelection<T>,
    curves: Option<&mut EditCurves>,
) -> Result<GradientVector<T>> {
    let (loss, g_tg) = model.loss_and_grad(&ctx.full, selection, Mode::Eval, GradScope::Editable)?;
    if !loss.is_finite() || !g_tg.is_finite() {
        return Err(Error::NonFinite(format!("target loss {loss}")));
    }
    if let Some(c) = curves {
        let (train_loss, g_train) = ctx.train_gradient(model)?;
        c.target_loss.push(loss.as_f64());
        c.train_loss.push(train_loss.as_f64());
        c.grad_rmse.push(grad_rmse(&g_train, &g_tg)?.as_f64());
    }
    let g = rewire_gradient(config, anchors, g_tg)?;
    if !g.is_finite() {
        return Err(Error::NonFinite("rewired gradient".into()));
    }
    Ok(g)
}
