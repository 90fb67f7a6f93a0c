use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use gredit::graph::{generate_sbm, load_graph, load_splits, save_graph, save_splits, split_stratified, SplitAssignment};
use gredit::harness::{
    run_motivation, run_protocol, sweep, write_csv, write_curves_csv, write_report, CurveRow, EditContext,
    MotivationConfig, MotivationCurves,
};
use gredit::models::{init_model, load_checkpoint, save_checkpoint, stitch_egnn, train_base, ModelKind};
use gredit::rewire::{load_anchors, save_anchors};
use gredit::{Graph64, Model64};

use crate::config::{ConfigError, ExperimentConfig};

/// A loaded configuration together with its validated JSON snapshot.
pub struct Run {
    pub config: ExperimentConfig,
    pub snapshot: Value,
    pub force: bool,
}

impl Run {
    fn out(&self) -> &Path {
        &self.config.output
    }

    /// Creates the output directory (refusing to reuse a non-empty one
    /// without `--force`) and stamps it with `config.json`.
    fn prepare_output(&self) -> Result<()> {
        let dir = self.out();
        if dir.exists() {
            let non_empty = fs::read_dir(dir)
                .with_context(|| format!("reading {}", dir.display()))?
                .next()
                .is_some();
            if non_empty && !self.force {
                return Err(ConfigError(format!(
                    "output: {} already exists and is not empty (pass --force to overwrite)",
                    dir.display()
                ))
                .into());
            }
        }
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let text = serde_json::to_string_pretty(&self.snapshot)? + "\n";
        fs::write(dir.join("config.json"), text).with_context(|| "writing config.json")?;
        Ok(())
    }
}

fn load_graph_from_config(config: &ExperimentConfig) -> Result<Graph64> {
    let d = &config.dataset;
    let mut graph = match (&d.path, &d.sbm) {
        (Some(path), _) => load_graph(path)?,
        (None, Some(sbm)) => generate_sbm(sbm)?,
        (None, None) => return Err(ConfigError("dataset.path: missing".into()).into()),
    };
    if d.row_normalize {
        graph.row_normalize_features();
    }
    Ok(graph)
}

/// Split precedence: `splits.json` next to a checkpoint, then one shipped
/// with the dataset directory, then a fresh stratified split.
fn resolve_split(config: &ExperimentConfig, graph: &Graph64, checkpoint: Option<&Path>) -> Result<SplitAssignment> {
    for dir in checkpoint.into_iter().chain(config.dataset.path.as_deref()) {
        if let Some(split) = load_splits(dir, graph.num_nodes())? {
            return Ok(split);
        }
    }
    let s = &config.dataset.split;
    Ok(split_stratified(
        graph.labels(),
        graph.num_classes(),
        s.train_per_class,
        s.valid_per_class,
        s.seed,
    )?)
}

fn context(config: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<EditContext<f64>> {
    let graph = load_graph_from_config(config)?;
    let split = resolve_split(config, &graph, checkpoint)?;
    Ok(EditContext::new(graph, split)?)
}

/// Trains `kind` on the train-only subgraph. EGNN kinds train their base and
/// stitch a fresh peer MLP on top.
fn train_kind(
    config: &ExperimentConfig,
    ctx: &EditContext<f64>,
    kind: ModelKind,
) -> Result<(Model64, Vec<f64>, Vec<f64>)> {
    let g = &ctx.full.graph;
    let base_kind = if kind.is_egnn() { kind.base().into() } else { kind };
    let arch = config
        .architecture
        .architecture(base_kind, g.feature_dim(), g.num_classes());
    let init = init_model(&arch, config.training.seed)?;
    let out = train_base(&init, &ctx.train, &config.training.train_config())?;
    let model = if kind.is_egnn() {
        stitch_egnn(&out.model)?
    } else {
        out.model
    };
    Ok((model, out.losses, out.accuracies))
}

fn model_for(run: &Run, ctx: &EditContext<f64>, checkpoint: Option<&Path>) -> Result<Model64> {
    match checkpoint {
        Some(dir) => {
            let model: Model64 = load_checkpoint(dir)?;
            let g = &ctx.full.graph;
            let arch = model.arch();
            if arch.input_dim != g.feature_dim() || arch.output_dim != g.num_classes() {
                return Err(gredit::Error::InvalidGraph(format!(
                    "checkpoint expects {}-d features and {} classes, dataset has {} and {}",
                    arch.input_dim,
                    arch.output_dim,
                    g.feature_dim(),
                    g.num_classes()
                ))
                .into());
            }
            Ok(model)
        }
        None => {
            let (model, _, _) = train_kind(&run.config, ctx, run.config.architecture.kind)?;
            save_checkpoint(run.out().join("model"), &model)?;
            save_splits(run.out().join("model"), &ctx.split)?;
            Ok(model)
        }
    }
}

#[derive(Serialize)]
struct TrainRow {
    epoch: usize,
    loss: f64,
    train_accuracy: f64,
}

pub fn train(run: &Run) -> Result<()> {
    run.prepare_output()?;
    let ctx = context(&run.config, None)?;
    let (model, losses, accs) = train_kind(&run.config, &ctx, run.config.architecture.kind)?;
    save_checkpoint(run.out(), &model)?;
    save_splits(run.out(), &ctx.split)?;
    let rows = losses.iter().zip(&accs).enumerate().map(|(i, (&loss, &acc))| TrainRow {
        epoch: i + 1,
        loss,
        train_accuracy: acc,
    });
    write_csv(&run.out().join("train_curve.csv"), rows)?;
    println!(
        "trained {} ({} params): final loss {:.6}, train accuracy {:.4}, test accuracy {:.2}%",
        model.arch().kind,
        model.num_params(),
        losses.last().copied().unwrap_or(f64::NAN),
        accs.last().copied().unwrap_or(f64::NAN),
        ctx.test_accuracy(&model)?
    );
    Ok(())
}

pub fn capture_anchors(run: &Run, checkpoint: &Path) -> Result<()> {
    run.prepare_output()?;
    let ctx = context(&run.config, Some(checkpoint))?;
    let model = model_for(run, &ctx, Some(checkpoint))?;
    let edit = run.config.editing.edit_config();
    let seed = run.config.editing.protocol_config().anchor_seed();
    let anchors = ctx.capture_anchors(&model, edit.effective_k(), seed)?;
    save_anchors(run.out(), &anchors)?;
    println!("captured K = {} anchor gradients", anchors.k());
    Ok(())
}

pub fn edit(run: &Run, checkpoint: Option<&Path>, anchors_dir: Option<&Path>) -> Result<()> {
    run.prepare_output()?;
    let ctx = context(&run.config, checkpoint)?;
    let model = model_for(run, &ctx, checkpoint)?;
    let edit = run.config.editing.edit_config();
    let protocol = run.config.editing.protocol_config();
    let anchors = match (edit.editor.needs_anchors(), anchors_dir) {
        (false, _) => None,
        (true, Some(dir)) => Some(load_anchors(dir, &model)?),
        (true, None) => {
            let a = ctx.capture_anchors(&model, edit.effective_k(), protocol.anchor_seed())?;
            save_anchors(run.out(), &a)?;
            Some(a)
        }
    };
    let report = run_protocol(&model, &ctx, &edit, anchors.as_ref(), &protocol)?;
    write_report(run.out(), &report)?;
    write_curves_csv(
        run.out().join("curves.csv"),
        &report.curve_rows(&model.arch().kind.to_string()),
    )?;
    for note in &report.notes {
        log::warn!("{note}");
    }
    println!(
        "{} / {}: {} edits, SR {:.3}, DD {:.3} ± {:.3}, Acc {:.3} ± {:.3}",
        report.editor,
        format!("{:?}", report.protocol).to_lowercase(),
        report.records.len(),
        report.success_rate,
        report.dd.mean,
        report.dd.std,
        report.acc.mean,
        report.acc.std
    );
    Ok(())
}

pub fn motivation(run: &Run) -> Result<()> {
    run.prepare_output()?;
    let ctx = context(&run.config, None)?;
    let m = &run.config.motivation;
    let models = m
        .kinds
        .iter()
        .map(|&k| train_kind(&run.config, &ctx, k).map(|(model, _, _)| (k.to_string(), model)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<(String, &Model64)> = models.iter().map(|(n, model)| (n.clone(), model)).collect();
    let config = MotivationConfig {
        steps: m.steps,
        num_targets: m.num_targets,
        step_size: run.config.editing.step_size,
        seed: m.seed,
    };
    let curves = run_motivation(&refs, &ctx, &config)?;
    let rows: Vec<CurveRow> = curves.iter().flat_map(MotivationCurves::rows).collect();
    write_curves_csv(run.out().join("curves.csv"), &rows)?;
    for c in &curves {
        if let Some(note) = &c.note {
            log::warn!("{}: {note}", c.arch);
        }
        let last = c.train_loss.len() - 1;
        println!(
            "{}: Grad_RMSE {:.4} -> {:.4}, train loss {:.4} -> {:.4}, target loss {:.4} -> {:.4}",
            c.arch, c.grad_rmse[0], c.grad_rmse[last], c.train_loss[0], c.train_loss[last], c.target_loss[0], c.target_loss[last]
        );
    }
    Ok(())
}

pub fn run_sweep(run: &Run, checkpoint: Option<&Path>) -> Result<()> {
    run.prepare_output()?;
    let ctx = context(&run.config, checkpoint)?;
    let model = model_for(run, &ctx, checkpoint)?;
    let rows = sweep(
        &model,
        &ctx,
        &run.config.editing.edit_config(),
        &run.config.sweep,
        &run.config.editing.protocol_config(),
    )?;
    write_csv(&run.out().join("pareto.csv"), &rows)?;
    println!("{} sweep rows written", rows.len());
    Ok(())
}

pub fn gen_sbm(run: &Run) -> Result<()> {
    let Some(sbm) = &run.config.dataset.sbm else {
        return Err(ConfigError("dataset.sbm: required for gen-sbm".into()).into());
    };
    if run.config.dataset.path.is_some() {
        return Err(ConfigError("dataset.path: must be unset for gen-sbm".into()).into());
    }
    run.prepare_output()?;
    let graph: Graph64 = generate_sbm(sbm)?;
    let split = resolve_split(&run.config, &graph, None)?;
    save_graph(run.out(), &graph)?;
    save_splits(run.out(), &split)?;
    println!(
        "generated {} nodes, {} edges, {} classes",
        graph.num_nodes(),
        graph.edges().len(),
        graph.num_classes()
    );
    Ok(())
}

pub fn output_path(out: Option<PathBuf>, config: &mut ExperimentConfig, snapshot: &mut Value) {
    if let Some(out) = out {
        snapshot["output"] = Value::String(out.display().to_string());
        config.output = out;
    }
}
