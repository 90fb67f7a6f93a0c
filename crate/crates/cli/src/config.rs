//! Experiment configuration: one JSON document plus dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use gredit::graph::SbmParams;
use gredit::harness::{EditConfig, EditorKind, MotivationConfig, ProtocolConfig, ProtocolKind, SweepConfig};
use gredit::models::{Architecture, BaseKind, ModelKind, TrainConfig};

/// A configuration problem. Maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train_per_class: usize,
    pub valid_per_class: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_per_class: 20,
            valid_per_class: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Graph directory (`meta.json`, `edges.csv`, `features.csv`, `labels.csv`).
    pub path: Option<PathBuf>,
    /// Synthetic graph, used when `path` is absent.
    pub sbm: Option<SbmParams>,
    pub row_normalize: bool,
    pub split: SplitConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            path: None,
            sbm: Some(SbmParams::default()),
            row_normalize: false,
            split: SplitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub kind: ModelKind,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Gcn,
            num_layers: 2,
            hidden_dim: 32,
            dropout: 0.1,
        }
    }
}

impl ArchConfig {
    pub fn architecture(&self, kind: ModelKind, input_dim: usize, output_dim: usize) -> Architecture {
        Architecture {
            kind,
            num_layers: self.num_layers,
            hidden_dim: self.hidden_dim,
            dropout: self.dropout,
            input_dim,
            output_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            lr: t.lr,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EditingConfig {
    pub editor: EditorKind,
    pub lambda: f64,
    pub k: usize,
    pub step_size: f64,
    pub max_steps: usize,
    pub tolerance: f64,
    pub record_curves: bool,
    pub protocol: ProtocolKind,
    pub num_edits: usize,
    pub batch_size: usize,
    pub num_rounds: usize,
    pub seed: u64,
    /// Sequential protocol: re-capture anchors before every edit.
    pub refresh_anchors: bool,
}

impl Default for EditingConfig {
    fn default() -> Self {
        let e = EditConfig::default();
        let p = ProtocolConfig::default();
        Self {
            editor: e.editor,
            lambda: e.lambda,
            k: e.k,
            step_size: e.step_size,
            max_steps: e.max_steps,
            tolerance: e.tolerance,
            record_curves: true,
            protocol: p.kind,
            num_edits: p.num_edits,
            batch_size: p.batch_size,
            num_rounds: p.num_rounds,
            seed: p.seed,
            refresh_anchors: p.refresh_anchors,
        }
    }
}

impl EditingConfig {
    pub fn edit_config(&self) -> EditConfig {
        EditConfig {
            editor: self.editor,
            step_size: self.step_size,
            max_steps: self.max_steps,
            lambda: self.lambda,
            k: self.k,
            tolerance: self.tolerance,
            record_curves: self.record_curves,
        }
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            kind: self.protocol,
            num_edits: self.num_edits,
            batch_size: self.batch_size,
            num_rounds: self.num_rounds,
            seed: self.seed,
            refresh_anchors: self.refresh_anchors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotivationBlock {
    pub kinds: Vec<ModelKind>,
    pub steps: usize,
    pub num_targets: usize,
    pub seed: u64,
}

impl Default for MotivationBlock {
    fn default() -> Self {
        let m = MotivationConfig::default();
        Self {
            kinds: vec![ModelKind::Mlp, ModelKind::Gcn, ModelKind::Sage],
            steps: m.steps,
            num_targets: m.num_targets,
            seed: m.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub architecture: ArchConfig,
    pub training: TrainingConfig,
    pub editing: EditingConfig,
    pub motivation: MotivationBlock,
    pub sweep: SweepConfig,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            architecture: ArchConfig::default(),
            training: TrainingConfig::default(),
            editing: EditingConfig::default(),
            motivation: MotivationBlock::default(),
            sweep: SweepConfig::default(),
            output: PathBuf::from("runs/default"),
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (or the defaults), applies `key=value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<(Self, Value), ConfigError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
                let parsed: ExperimentConfig = serde_json::from_str(&text)
                    .map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
                serde_json::to_value(parsed).expect("config serializes")
            }
            None => serde_json::to_value(ExperimentConfig::default()).expect("config serializes"),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: ExperimentConfig =
            serde_json::from_value(value.clone()).map_err(|e| ConfigError(e.to_string()))?;
        config.validate()?;
        let value = serde_json::to_value(&config).expect("config serializes");
        Ok((config, value))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.dataset;
        match (&d.path, &d.sbm) {
            (Some(p), _) if !p.is_dir() => {
                return bad(format!("dataset.path: {} is not a directory", p.display()))
            }
            (None, None) => return bad("dataset.path: missing (and no dataset.sbm block given)"),
            (None, Some(sbm)) => {
                if sbm.nodes_per_block == 0 || sbm.num_blocks == 0 {
                    return bad("dataset.sbm: num_blocks and nodes_per_block must be >= 1");
                }
                if !(0.0..=1.0).contains(&sbm.p_in) || !(0.0..=sbm.p_in).contains(&sbm.p_out) {
                    return bad("dataset.sbm: need 0 <= p_out <= p_in <= 1");
                }
            }
            _ => {}
        }
        let a = &self.architecture;
        if a.num_layers == 0 {
            return bad("architecture.num_layers: must be >= 1");
        }
        if a.hidden_dim == 0 {
            return bad("architecture.hidden_dim: must be >= 1");
        }
        if !(0.0..1.0).contains(&a.dropout) {
            return bad(format!("architecture.dropout: must be in [0, 1), got {}", a.dropout));
        }
        if matches!(a.kind, ModelKind::Egnn(BaseKind::Mlp)) {
            return bad("architecture.kind: EGNN needs a GCN or SAGE base");
        }
        if !(self.training.lr >= 0.0) {
            return bad("training.lr: must be >= 0");
        }
        let e = &self.editing;
        if !(e.lambda >= 0.0) {
            return bad(format!("editing.lambda: must be >= 0, got {}", e.lambda));
        }
        if e.k == 0 || e.k > gredit::rewire::MAX_QP_DIM {
            return bad(format!("editing.k: must be in 1..={}", gredit::rewire::MAX_QP_DIM));
        }
        if !(e.step_size >= 0.0) {
            return bad("editing.step_size: must be >= 0");
        }
        if e.max_steps == 0 {
            return bad("editing.max_steps: must be >= 1");
        }
        if !(e.tolerance > 0.0) {
            return bad("editing.tolerance: must be > 0");
        }
        self.editing
            .protocol_config()
            .validate()
            .map_err(|err| ConfigError(format!("editing: {err}")))?;
        if self.motivation.num_targets == 0 {
            return bad("motivation.num_targets: must be >= 1");
        }
        if self.sweep.lambda_grid.is_empty() || self.sweep.k_grid.is_empty() {
            return bad("sweep: lambda_grid and k_grid must be non-empty");
        }
        if self.sweep.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return bad("sweep.lambda_grid: entries must be >= 0");
        }
        if self.sweep.k_grid.iter().any(|&k| k == 0 || k > gredit::rewire::MAX_QP_DIM) {
            return bad("sweep.k_grid: entries must be in 1..=32");
        }
        Ok(())
    }
}

/// Sets the leaf at a dotted path, e.g. `editing.lambda=0.1`. The value is
/// parsed as JSON, falling back to a plain string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("override '{spec}' is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| ConfigError(format!("{path}: '{}' is not an object", keys[..i].join("."))))?;
        if last {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj
            .get_mut(*key)
            .ok_or_else(|| ConfigError(format!("{path}: unknown key '{key}'")))?;
    }
    unreachable!("split yields at least one key")
}
