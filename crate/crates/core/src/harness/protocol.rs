use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mean_std, MeanStd};
use super::{edit_once, edit_with_stale_anchors, EditConfig, EditContext, EditOutcome, EditRequest, EditorKind};
use crate::error::{Error, Result};
use crate::models::{argmax, mix_seed, Model};
use crate::rewire::AnchorGradientSet;
use crate::scalar::Scalar;

const TARGET_STREAM: u64 = 0x7A86E7;
const ANCHOR_STREAM: u64 = 0xA4C402;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Independent,
    Sequential,
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    /// Edits for the independent and sequential protocols.
    pub num_edits: usize,
    pub batch_size: usize,
    pub num_rounds: usize,
    pub seed: u64,
    /// Sequential only: re-capture anchors from the current model before each
    /// edit instead of keeping those of the base model.
    pub refresh_anchors: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            kind: ProtocolKind::Independent,
            num_edits: 50,
            batch_size: 10,
            num_rounds: 10,
            seed: 0,
            refresh_anchors: false,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let zero = match self.kind {
            ProtocolKind::Batch if self.batch_size == 0 => Some("batch_size"),
            ProtocolKind::Batch if self.num_rounds == 0 => Some("num_rounds"),
            ProtocolKind::Independent | ProtocolKind::Sequential if self.num_edits == 0 => Some("num_edits"),
            _ => None,
        };
        match zero {
            Some(field) => Err(Error::InvalidArgument(format!("{field} must be >= 1"))),
            None => Ok(()),
        }
    }

    /// Seed of the anchor subsets captured for this protocol.
    pub fn anchor_seed(&self) -> u64 {
        mix_seed(self.seed, ANCHOR_STREAM)
    }
}

/// One edit of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    pub index: usize,
    pub targets: Vec<usize>,
    pub desired_labels: Vec<usize>,
    pub dd: f64,
    #[serde(flatten)]
    pub outcome: EditOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub editor: EditorKind,
    pub protocol: ProtocolKind,
    pub model_seed: u64,
    pub protocol_seed: u64,
    pub edit_config: EditConfig,
    pub protocol_config: ProtocolConfig,
    /// Test accuracy of the unedited model, percent.
    pub base_accuracy: f64,
    pub success_rate: f64,
    pub acc: MeanStd,
    pub dd: MeanStd,
    pub dd_success_only: MeanStd,
    /// `base_accuracy − accuracy` after each sequential edit.
    pub cumulative_dd: Option<Vec<f64>>,
    pub notes: Vec<String>,
    pub records: Vec<EditRecord>,
}

impl RunReport {
    fn new<T: Scalar>(
        model: &Model<T>,
        config: &EditConfig,
        protocol: &ProtocolConfig,
        base_accuracy: f64,
        records: Vec<EditRecord>,
        notes: Vec<String>,
    ) -> Self {
        let n = records.len();
        let successes = records.iter().filter(|r| r.outcome.success).count();
        Self {
            editor: config.editor,
            protocol: protocol.kind,
            model_seed: model.seed(),
            protocol_seed: protocol.seed,
            edit_config: config.clone(),
            protocol_config: protocol.clone(),
            base_accuracy,
            success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
            acc: mean_std(records.iter().map(|r| r.outcome.acc_after)),
            dd: mean_std(records.iter().map(|r| r.dd)),
            dd_success_only: mean_std(records.iter().filter(|r| r.outcome.success).map(|r| r.dd)),
            cumulative_dd: None,
            notes,
            records,
        }
    }
}

/// Validation nodes the model currently misclassifies, ascending.
pub fn misclassified<T: Scalar>(model: &Model<T>, ctx: &EditContext<T>) -> Result<Vec<usize>> {
    let logits = model.logits(&ctx.full)?;
    let labels = ctx.full.labels();
    Ok(ctx
        .valid_nodes()
        .into_iter()
        .filter(|&i| argmax(logits.row(i)) != labels[i])
        .collect())
}

/// Draws `n` entries, without replacement while the pool lasts. Returns
/// whether replacement was needed.
fn draw(pool: &[usize], n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    if pool.len() >= n {
        let mut rest = pool.to_vec();
        let picks = (0..n).map(|_| rest.remove(rng.random_range(0..rest.len()))).collect();
        (picks, false)
    } else {
        ((0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect(), true)
    }
}

fn target_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, TARGET_STREAM))
}

fn resolve_anchors<T: Scalar>(
    model: &Model<T>,
    ctx: &EditContext<T>,
    config: &EditConfig,
    anchors: Option<&AnchorGradientSet<T>>,
    seed: u64,
) -> Result<Option<AnchorGradientSet<T>>> {
    if !config.editor.needs_anchors() {
        return Ok(None);
    }
    match anchors {
        Some(a) => {
            a.check_model(model)?;
            if a.k() != config.effective_k() {
                return Err(Error::InvalidArgument(format!(
                    "anchor set has K = {}, editor expects K = {}",
                    a.k(),
                    config.effective_k()
                )));
            }
            Ok(Some(a.clone()))
        }
        None => ctx.capture_anchors(model, config.effective_k(), seed).map(Some),
    }
}

fn record(index: usize, request: &EditRequest, outcome: EditOutcome) -> EditRecord {
    EditRecord {
        index,
        targets: request.targets.clone(),
        desired_labels: request.desired_labels.clone(),
        dd: outcome.dd(),
        outcome,
    }
}

fn run_parallel<T: Scalar>(
    model: &Model<T>,
    ctx: &EditContext<T>,
    config: &EditConfig,
    anchors: Option<&AnchorGradientSet<T>>,
    requests: &[EditRequest],
) -> Result<Vec<EditRecord>> {
    requests
        .par_iter()
        .enumerate()
        .map(|(i, req)| edit_once(model, ctx, config, anchors, req).map(|(_, out)| record(i, req, out)))
        .collect()
}

/// `num_edits` edits of misclassified validation nodes, each starting from
/// `model`. Anchors are captured from `model` when not supplied.
pub fn run_independent<T: Scalar>(
    model: &Model<T>,
    ctx: &EditContext<T>,
    config: &EditConfig,
    anchors: Option<&AnchorGradientSet<T>>,
    protocol: &ProtocolConfig,
) -> Result<RunReport> {
    protocol.validate()?;
    config.validate()?;
    let base_accuracy = ctx.test_accuracy(model)?;
    let pool = misclassified(model, ctx)?;
    let mut notes = Vec::new();
    if pool.is_empty() {
        notes.push("no misclassified validation node; nothing to edit".into());
        return Ok(RunReport::new(model, config, protocol, base_accuracy, Vec::new(), notes));
    }
    let (targets, replaced) = draw(&pool, protocol.num_edits, &mut target_rng(protocol.seed));
    if replaced {
        notes.push(format!(
            "only {} misclassified validation nodes; targets drawn with replacement",
            pool.len()
        ));
    }
    let anchors = resolve_anchors(model, ctx, config, anchors, protocol.anchor_seed())?;
    let labels = ctx.full.labels();
    let requests: Vec<EditRequest> = targets
        .iter()
        .map(|&t| EditRequest::single(t, labels[t], config))
        .collect();
    let records = run_parallel(model, ctx, config, anchors.as_ref(), &requests)?;
    Ok(RunReport::new(model, config, protocol, base_accuracy, records, notes))
}

/// Chained edits: each starts from the previous result. Targets are drawn
/// without replacement from the nodes misclassified by the current model,
/// and anchors come from the base model unless `refresh_anchors` is set.
pub fn run_sequential<T: Scalar>(
    model: &Model<T>,
    ctx: &EditContext<T>,
    config: &EditConfig,
    anchors: Option<&AnchorGradientSet<T>>,
    protocol: &ProtocolConfig,
) -> Result<RunReport> {
    protocol.validate()?;
    config.validate()?;
    let base_accuracy = ctx.test_accuracy(model)?;
    let mut rng = target_rng(protocol.seed);
    let labels = ctx.full.labels();
    let mut current = model.clone();
    let mut used = vec![false; ctx.full.num_nodes()];
    let mut records = Vec::with_capacity(protocol.num_edits);
    let mut curve = Vec::with_capacity(protocol.num_edits);
    let mut notes = Vec::new();
    let mut anchors = resolve_anchors(model, ctx, config, anchors, protocol.anchor_seed())?;
    for index in 0..protocol.num_edits {
        let pool: Vec<usize> = misclassified(&current, ctx)?
            .into_iter()
            .filter(|&i| !used[i])
            .collect();
        if pool.is_empty() {
            notes.push(format!("target pool exhausted after {index} edits"));
            break;
        }
        let target = pool[rng.random_range(0..pool.len())];
        used[target] = true;
        if index > 0 && protocol.refresh_anchors && config.editor.needs_anchors() {
            anchors = Some(ctx.capture_anchors(&current, config.effective_k(), protocol.anchor_seed())?);
        }
        let request = EditRequest::single(target, labels[target], config);
        let (next, outcome) = edit_with_stale_anchors(&current, ctx, config, anchors.as_ref(), &request)?;
        curve.push(base_accuracy - outcome.acc_after);
        records.push(record(index, &request, outcome));
        current = next;
    }
    let mut report = RunReport::new(model, config, protocol, base_accuracy, records, notes);
    report.cumulative_dd = Some(curve);
    Ok(report)
}

/// `num_rounds` batch edits of `batch_size` misclassified validation nodes,
/// each round starting from `model`. A round succeeds only when every member
/// is corrected.
pub fn run_batch<T: Scalar>(
    model: &Model<T>,
    ctx: &EditContext<T>,
    config: &EditConfig,
    anchors: Option<&AnchorGradientSet<T>>,
    protocol: &ProtocolConfig,
) -> Result<RunReport> {
    protocol.validate()?;
    config.validate()?;
    let base_accuracy = ctx.test_accuracy(model)?;
    let pool = misclassified(model, ctx)?;
    let mut notes = Vec::new();
    if pool.is_empty() {
        notes.push("no misclassified validation node; nothing to edit".into());
        return Ok(RunReport::new(model, config, protocol, base_accuracy, Vec::new(), notes));
    }
    let mut rng = target_rng(protocol.seed);
    let labels = ctx.full.labels();
    let mut requests = Vec::with_capacity(protocol.num_rounds);
    let mut any_replaced = false;
    for _ in 0..protocol.num_rounds {
        let (targets, replaced) = draw(&pool, protocol.batch_size, &mut rng);
        any_replaced |= replaced;
        let desired = targets.iter().map(|&t| labels[t]).collect();
        requests.push(EditRequest::batch(targets, desired, config));
    }
    if any_replaced {
        notes.push(format!(
            "only {} misclassified validation nodes; batch members drawn with replacement",
            pool.len()
        ));
    }
    let anchors = resolve_anchors(model, ctx, config, anchors, protocol.anchor_seed())?;
    let records = run_parallel(model, ctx, config, anchors.as_ref(), &requests)?;
    Ok(RunReport::new(model, config, protocol, base_accuracy, records, notes))
}

/// Dispatches on `protocol.kind`.
pub fn run_protocol<T: Scalar>(
    model: &Model<T>,
    ctx: &EditContext<T>,
    config: &EditConfig,
    anchors: Option<&AnchorGradientSet<T>>,
    protocol: &ProtocolConfig,
) -> Result<RunReport> {
    match protocol.kind {
        ProtocolKind::Independent => run_independent(model, ctx, config, anchors, protocol),
        ProtocolKind::Sequential => run_sequential(model, ctx, config, anchors, protocol),
        ProtocolKind::Batch => run_batch(model, ctx, config, anchors, protocol),
    }
}
