//! MLP, GCN and GraphSAGE-mean classifiers, the EGNN peer-MLP wrapper,
//! base training and prediction.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use train::{train_base, TrainConfig, TrainOutcome};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diff::{GradientVector, NodeSelection, ParamLayout, ParamVector, Tape};
use crate::error::{Error, Result};
use crate::graph::PreparedGraph;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// A plain layer stack type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseKind {
    Mlp,
    Gcn,
    Sage,
}

/// Architecture family, including the EGNN wrapper over a GNN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelKind {
    Mlp,
    Gcn,
    Sage,
    Egnn(BaseKind),
}

impl ModelKind {
    pub fn base(self) -> BaseKind {
        match self {
            ModelKind::Mlp => BaseKind::Mlp,
            ModelKind::Gcn => BaseKind::Gcn,
            ModelKind::Sage => BaseKind::Sage,
            ModelKind::Egnn(b) => b,
        }
    }

    pub fn is_egnn(self) -> bool {
        matches!(self, ModelKind::Egnn(_))
    }
}

impl From<BaseKind> for ModelKind {
    fn from(b: BaseKind) -> Self {
        match b {
            BaseKind::Mlp => ModelKind::Mlp,
            BaseKind::Gcn => ModelKind::Gcn,
            BaseKind::Sage => ModelKind::Sage,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Gcn => "gcn",
            ModelKind::Sage => "sage",
            ModelKind::Egnn(BaseKind::Gcn) => "egnn-gcn",
            ModelKind::Egnn(BaseKind::Sage) => "egnn-sage",
            ModelKind::Egnn(BaseKind::Mlp) => "egnn-mlp",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(ModelKind::Mlp),
            "gcn" => Ok(ModelKind::Gcn),
            "sage" | "graphsage" => Ok(ModelKind::Sage),
            "egnn-gcn" => Ok(ModelKind::Egnn(BaseKind::Gcn)),
            "egnn-sage" => Ok(ModelKind::Egnn(BaseKind::Sage)),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind {other:?} (expected mlp, gcn, sage, egnn-gcn, egnn-sage)"
            ))),
        }
    }
}

impl TryFrom<String> for ModelKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelKind> for String {
    fn from(k: ModelKind) -> String {
        k.to_string()
    }
}

/// Architecture descriptor. The EGNN peer MLP reuses `num_layers` and `hidden_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: ModelKind,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Architecture {
    /// Two layers, 32 hidden units, dropout 0.1.
    pub fn with_defaults(kind: ModelKind, input_dim: usize, output_dim: usize) -> Self {
        Self {
            kind,
            num_layers: 2,
            hidden_dim: 32,
            dropout: 0.1,
            input_dim,
            output_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::InvalidArgument("num_layers must be >= 1".into()));
        }
        if self.num_layers > 1 && self.hidden_dim == 0 {
            return Err(Error::InvalidArgument("hidden_dim must be >= 1".into()));
        }
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidArgument(
                "input_dim and output_dim must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.kind == ModelKind::Egnn(BaseKind::Mlp) {
            return Err(Error::InvalidArgument(
                "EGNN wraps a GCN or SAGE base".into(),
            ));
        }
        Ok(())
    }

    fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend(std::iter::repeat_n(self.hidden_dim, self.num_layers - 1));
        dims.push(self.output_dim);
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LayerTensors {
    weight: usize,
    weight_neigh: Option<usize>,
    bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Stack {
    kind: BaseKind,
    layers: Vec<LayerTensors>,
}

fn push_stack(layout: &mut ParamLayout, prefix: &str, kind: BaseKind, dims: &[usize]) -> Stack {
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let (weight, weight_neigh) = match kind {
                BaseKind::Sage => (
                    layout.push(format!("{prefix}layer{l}.weight_self"), fan_in, fan_out),
                    Some(layout.push(format!("{prefix}layer{l}.weight_neigh"), fan_in, fan_out)),
                ),
                _ => (layout.push(format!("{prefix}layer{l}.weight"), fan_in, fan_out), None),
            };
            let bias = layout.push(format!("{prefix}layer{l}.bias"), 1, fan_out);
            LayerTensors {
                weight,
                weight_neigh,
                bias,
            }
        })
        .collect();
    Stack { kind, layers }
}

/// Builds the parameter layout and the per-branch tensor indices.
fn build_layout(arch: &Architecture) -> (ParamLayout, Vec<Stack>) {
    let dims = arch.dims();
    let mut layout = ParamLayout::new();
    let stacks = match arch.kind {
        ModelKind::Egnn(base) => vec![
            push_stack(&mut layout, "base.", base, &dims),
            push_stack(&mut layout, "peer.", BaseKind::Mlp, &dims),
        ],
        kind => vec![push_stack(&mut layout, "", kind.base(), &dims)],
    };
    (layout, stacks)
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn glorot_fill<T: Scalar>(params: &mut ParamVector<T>, stack: &Stack, rng: &mut ChaCha8Rng, zero_last: bool) {
    let last = stack.layers.len() - 1;
    for (l, layer) in stack.layers.iter().enumerate() {
        let zero = zero_last && l == last;
        for tensor in std::iter::once(layer.weight).chain(layer.weight_neigh) {
            let spec = params.layout().get(tensor).clone();
            let bound = (6.0 / (spec.rows + spec.cols) as f64).sqrt();
            for w in params.tensor_mut(tensor) {
                *w = if zero {
                    T::zero()
                } else {
                    T::lit(rng.random_range(-bound..=bound))
                };
            }
        }
        // biases start at zero
    }
}

/// Whether dropout is active for a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

/// Which coordinates a gradient is reported on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradScope {
    All,
    Editable,
}

/// Architecture plus flat parameters and the editable-coordinate mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    arch: Architecture,
    params: ParamVector<T>,
    editable_mask: Vec<bool>,
    seed: u64,
    stacks: Vec<Stack>,
}

/// Glorot-uniform weights and zero biases. An EGNN model is an initialized
/// base with a stitched peer MLP.
pub fn init_model<T: Scalar>(arch: &Architecture, seed: u64) -> Result<Model<T>> {
    arch.validate()?;
    if let ModelKind::Egnn(base) = arch.kind {
        let base_arch = Architecture {
            kind: base.into(),
            ..arch.clone()
        };
        return stitch_egnn(&init_model(&base_arch, seed)?);
    }
    let (layout, stacks) = build_layout(arch);
    let mut params = ParamVector::zeros(Arc::new(layout));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    glorot_fill(&mut params, &stacks[0], &mut rng, false);
    let editable_mask = vec![true; params.len()];
    Ok(Model {
        arch: arch.clone(),
        params,
        editable_mask,
        seed,
        stacks,
    })
}

/// Wraps a trained GCN/SAGE model with a peer MLP whose output layer is zero,
/// so every pre-edit logit is unchanged. Only the peer MLP is editable.
pub fn stitch_egnn<T: Scalar>(base: &Model<T>) -> Result<Model<T>> {
    match base.arch.kind {
        ModelKind::Egnn(_) => return Err(Error::AlreadyStitched),
        ModelKind::Mlp => {
            return Err(Error::InvalidArgument(
                "EGNN stitching needs a GCN or SAGE base".into(),
            ))
        }
        _ => {}
    }
    let arch = Architecture {
        kind: ModelKind::Egnn(base.arch.kind.base()),
        ..base.arch.clone()
    };
    let (layout, stacks) = build_layout(&arch);
    let mut params = ParamVector::zeros(Arc::new(layout));
    let base_len = base.params.len();
    params.as_mut_slice()[..base_len].copy_from_slice(base.params.as_slice());
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(base.seed, 0xE6));
    glorot_fill(&mut params, &stacks[1], &mut rng, true);
    let editable_mask = (0..params.len()).map(|i| i >= base_len).collect();
    Ok(Model {
        arch,
        params,
        editable_mask,
        seed: base.seed,
        stacks,
    })
}

impl<T: Scalar> Model<T> {
    /// Reassembles a model from an architecture and a stored parameter vector.
    pub fn from_parts(arch: Architecture, data: Vec<T>, seed: u64) -> Result<Self> {
        arch.validate()?;
        let (layout, stacks) = build_layout(&arch);
        let params = ParamVector::from_vec(Arc::new(layout), data)?;
        let editable_mask = match arch.kind {
            ModelKind::Egnn(_) => {
                let peer_start = params.layout().get(stacks[1].layers[0].weight).offset;
                (0..params.len()).map(|i| i >= peer_start).collect()
            }
            _ => vec![true; params.len()],
        };
        Ok(Self {
            arch,
            params,
            editable_mask,
            seed,
            stacks,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamVector<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector<T> {
        &mut self.params
    }

    pub fn editable_mask(&self) -> &[bool] {
        &self.editable_mask
    }

    pub fn num_editable(&self) -> usize {
        self.editable_mask.iter().filter(|&&m| m).count()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// SHA-256 over the architecture descriptor and the little-endian parameter bytes.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&self.arch).expect("architecture serializes"));
        hasher.update(self.seed.to_le_bytes());
        for p in self.params.as_slice() {
            hasher.update(p.as_f64().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    fn check_input(&self, graph: &PreparedGraph<T>) -> Result<()> {
        if graph.graph.feature_dim() != self.arch.input_dim {
            return Err(Error::dim(
                "forward",
                format!("feature dim {}", self.arch.input_dim),
                graph.graph.feature_dim(),
            ));
        }
        Ok(())
    }

    fn run<'a>(&'a self, graph: &'a PreparedGraph<T>, mode: Mode, recording: bool) -> Result<Tape<'a, T>> {
        self.check_input(graph)?;
        let mut tape = Tape::new(graph, &self.params, recording);
        let (training, seed) = match mode {
            Mode::Eval => (false, 0),
            Mode::Train { seed } => (true, seed),
        };
        for (b, stack) in self.stacks.iter().enumerate() {
            tape.begin_branch();
            let mut h = graph.graph.features().clone();
            let last = stack.layers.len() - 1;
            for (l, layer) in stack.layers.iter().enumerate() {
                let input_grad = l > 0;
                let z = match stack.kind {
                    BaseKind::Mlp => tape.dense(&h, layer.weight, layer.bias, input_grad)?,
                    BaseKind::Gcn => tape.gcn(&h, layer.weight, layer.bias, input_grad)?,
                    BaseKind::Sage => tape.sage(
                        &h,
                        layer.weight,
                        layer.weight_neigh.expect("sage layers carry a neighbour weight"),
                        layer.bias,
                        input_grad,
                    )?,
                };
                h = if l == last {
                    z
                } else {
                    let a = tape.relu(&z);
                    let layer_seed = mix_seed(seed, (b * 64 + l) as u64);
                    tape.dropout(a, self.arch.dropout, layer_seed, training)?
                };
            }
            tape.end_branch(h)?;
        }
        Ok(tape)
    }

    /// Logits for every node of `graph` (dropout as given by `mode`).
    pub fn forward(&self, graph: &PreparedGraph<T>, mode: Mode) -> Result<Matrix<T>> {
        Ok(self
            .run(graph, mode, false)?
            .into_logits()
            .expect("at least one branch"))
    }

    /// Evaluation-mode logits.
    pub fn logits(&self, graph: &PreparedGraph<T>) -> Result<Matrix<T>> {
        self.forward(graph, Mode::Eval)
    }

    /// Records a forward pass for a later `backward`.
    pub fn record<'a>(&'a self, graph: &'a PreparedGraph<T>, mode: Mode) -> Result<Tape<'a, T>> {
        self.run(graph, mode, true)
    }

    pub fn loss(&self, graph: &PreparedGraph<T>, selection: &NodeSelection<T>, mode: Mode) -> Result<T> {
        let logits = self.forward(graph, mode)?;
        Ok(crate::diff::softmax_cross_entropy(&logits, selection)?.0)
    }

    /// Loss value and its exact gradient; `GradScope::Editable` zeroes frozen coordinates.
    pub fn loss_and_grad(
        &self,
        graph: &PreparedGraph<T>,
        selection: &NodeSelection<T>,
        mode: Mode,
        scope: GradScope,
    ) -> Result<(T, GradientVector<T>)> {
        let mut tape = self.record(graph, mode)?;
        let loss = tape.attach_loss(selection)?;
        let mut grad = tape.backward()?;
        if scope == GradScope::Editable {
            grad.mask(&self.editable_mask)?;
        }
        Ok((loss, grad))
    }

    /// Applies `θ ← θ − step·g`.
    pub fn descend(&mut self, step: T, grad: &GradientVector<T>) -> Result<()> {
        self.params.descend(step, grad)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Evaluation-mode class predictions for `nodes`.
pub fn predict<T: Scalar>(model: &Model<T>, graph: &PreparedGraph<T>, nodes: &[usize]) -> Result<Vec<usize>> {
    let logits = model.logits(graph)?;
    Ok(predict_from_logits(&logits, nodes))
}

pub fn predict_from_logits<T: Scalar>(logits: &Matrix<T>, nodes: &[usize]) -> Vec<usize> {
    nodes.iter().map(|&i| argmax(logits.row(i))).collect()
}

/// Fraction of `nodes` whose argmax equals the graph label.
pub fn accuracy_from_logits<T: Scalar>(logits: &Matrix<T>, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let correct = nodes
        .iter()
        .filter(|&&i| argmax(logits.row(i)) == labels[i])
        .count();
    correct as f64 / nodes.len() as f64
}

pub fn accuracy<T: Scalar>(model: &Model<T>, graph: &PreparedGraph<T>, nodes: &[usize]) -> Result<f64> {
    let logits = model.logits(graph)?;
    Ok(accuracy_from_logits(&logits, graph.labels(), nodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, Graph, SbmParams};

    fn arch(kind: ModelKind, layers: usize, input: usize, output: usize) -> Architecture {
        Architecture {
            kind,
            num_layers: layers,
            hidden_dim: 4,
            dropout: 0.0,
            input_dim: input,
            output_dim: output,
        }
    }

    fn small_sbm() -> PreparedGraph<f64> {
        PreparedGraph::new(
            generate_sbm(&SbmParams {
                num_blocks: 2,
                nodes_per_block: 6,
                p_in: 0.5,
                p_out: 0.1,
                feature_dim: 3,
                feature_noise: 0.5,
                seed: 3,
            })
            .unwrap(),
        )
    }

    #[test]
    fn same_seed_same_params() {
        let a = Architecture::with_defaults(ModelKind::Gcn, 5, 3);
        let m1: Model<f64> = init_model(&a, 9).unwrap();
        let m2: Model<f64> = init_model(&a, 9).unwrap();
        let m3: Model<f64> = init_model(&a, 10).unwrap();
        assert_eq!(m1.params(), m2.params());
        assert_ne!(m1.params(), m3.params());
        assert!(m1.editable_mask().iter().all(|&m| m));
    }

    #[test]
    fn glorot_bounds_hold_for_square_layer() {
        let a = Architecture {
            num_layers: 3,
            hidden_dim: 32,
            ..Architecture::with_defaults(ModelKind::Mlp, 32, 32)
        };
        let bound = (6.0f64 / 64.0).sqrt();
        for seed in 0..100 {
            let m: Model<f64> = init_model(&a, seed).unwrap();
            let spec = m.params().layout().find("layer1.weight").unwrap().clone();
            assert_eq!((spec.rows, spec.cols), (32, 32));
            assert!(m.params().as_slice()[spec.range()]
                .iter()
                .all(|w| w.abs() <= bound));
            let bias = m.params().layout().find("layer1.bias").unwrap().range();
            assert!(m.params().as_slice()[bias].iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn one_layer_gcn_with_identity_weight_returns_features() {
        let x = Matrix::from_vec(1, 3, vec![0.2, -1.0, 4.0]).unwrap();
        let g = PreparedGraph::new(Graph::new(1, vec![], x.clone(), vec![0], 3).unwrap());
        let a = arch(ModelKind::Gcn, 1, 3, 3);
        let mut m: Model<f64> = init_model(&a, 0).unwrap();
        let w = m.params().layout().find("layer0.weight").unwrap().range();
        m.params_mut().as_mut_slice()[w].copy_from_slice(Matrix::<f64>::identity(3).as_slice());
        assert_eq!(m.logits(&g).unwrap(), x);
    }

    #[test]
    fn two_layer_gcn_matches_dense_chain() {
        let x = Matrix::from_vec(2, 2, vec![1.0, -0.5, 0.25, 2.0]).unwrap();
        let g = PreparedGraph::new(Graph::new(2, vec![(0, 1)], x.clone(), vec![0, 1], 2).unwrap());
        let a = arch(ModelKind::Gcn, 2, 2, 2);
        let mut m: Model<f64> = init_model(&a, 4).unwrap();
        let b0 = m.params().layout().find("layer0.bias").unwrap().range();
        m.params_mut().as_mut_slice()[b0].iter_mut().for_each(|b| *b = 0.1);
        let p = m.params();
        let w0 = p.matrix(0);
        let bias0 = p.tensor(1).to_vec();
        let w1 = p.matrix(2);
        let bias1 = p.tensor(3).to_vec();
        let adj = Matrix::from_vec(2, 2, vec![0.5; 4]).unwrap();
        let mut h = adj.matmul(&x.matmul(&w0).unwrap()).unwrap();
        h.add_row_broadcast(&bias0).unwrap();
        let h = h.map(|v| v.max(0.0));
        let mut out = adj.matmul(&h.matmul(&w1).unwrap()).unwrap();
        out.add_row_broadcast(&bias1).unwrap();
        assert!(m.logits(&g).unwrap().max_abs_diff(&out) < 1e-12);
    }

    #[test]
    fn mlp_ignores_edges() {
        let g = small_sbm();
        let rewired = PreparedGraph::new(g.graph.with_edges(vec![(0, 11), (3, 4)]).unwrap());
        let a = arch(ModelKind::Mlp, 2, 3, 2);
        let m: Model<f64> = init_model(&a, 1).unwrap();
        assert_eq!(m.logits(&g).unwrap(), m.logits(&rewired).unwrap());
    }

    #[test]
    fn isolated_node_sees_only_its_own_features() {
        let g = small_sbm();
        // detach node 0 from everything
        let kept: Vec<_> = g.graph.edges().iter().copied().filter(|&(u, v)| u != 0 && v != 0).collect();
        let g = PreparedGraph::new(g.graph.with_edges(kept).unwrap());
        let lone = PreparedGraph::new(
            Graph::new(
                1,
                vec![],
                Matrix::from_vec(1, 3, g.graph.features().row(0).to_vec()).unwrap(),
                vec![0],
                2,
            )
            .unwrap(),
        );
        for kind in [ModelKind::Gcn, ModelKind::Sage] {
            let m: Model<f64> = init_model(&arch(kind, 2, 3, 2), 2).unwrap();
            let full = m.logits(&g).unwrap();
            let alone = m.logits(&lone).unwrap();
            for j in 0..2 {
                assert!((full[(0, j)] - alone[(0, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.0, 1.0, 0.0]), 1);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn stitching_preserves_logits_and_masks_base() {
        let g = small_sbm();
        for kind in [ModelKind::Gcn, ModelKind::Sage] {
            let base: Model<f64> = init_model(&arch(kind, 2, 3, 2), 5).unwrap();
            let egnn = stitch_egnn(&base).unwrap();
            assert_eq!(egnn.logits(&g).unwrap(), base.logits(&g).unwrap());
            let peer_len = egnn.num_params() - base.num_params();
            assert_eq!(egnn.num_editable(), peer_len);
            assert!(egnn.editable_mask()[..base.num_params()].iter().all(|&m| !m));
            assert!(matches!(stitch_egnn(&egnn), Err(Error::AlreadyStitched)));
            let rebuilt = Model::from_parts(
                egnn.arch().clone(),
                egnn.params().as_slice().to_vec(),
                egnn.seed(),
            )
            .unwrap();
            assert_eq!(rebuilt, egnn);
        }
        let mlp: Model<f64> = init_model(&arch(ModelKind::Mlp, 2, 3, 2), 5).unwrap();
        assert!(stitch_egnn(&mlp).is_err());
    }

    #[test]
    fn editable_scope_zeroes_frozen_coordinates() {
        let g = small_sbm();
        let base: Model<f64> = init_model(&arch(ModelKind::Gcn, 2, 3, 2), 5).unwrap();
        let egnn = stitch_egnn(&base).unwrap();
        let sel = NodeSelection::mean(vec![2], g.labels());
        let (_, all) = egnn.loss_and_grad(&g, &sel, Mode::Eval, GradScope::All).unwrap();
        let (_, editable) = egnn.loss_and_grad(&g, &sel, Mode::Eval, GradScope::Editable).unwrap();
        for (i, (&a, &e)) in all.as_slice().iter().zip(editable.as_slice()).enumerate() {
            if egnn.editable_mask()[i] {
                assert_eq!(a, e);
            } else {
                assert_eq!(e, 0.0);
            }
        }
        assert!(all.as_slice()[..base.num_params()].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn feature_dim_mismatch_is_rejected() {
        let g = small_sbm();
        let m: Model<f64> = init_model(&arch(ModelKind::Gcn, 2, 4, 2), 0).unwrap();
        assert!(m.logits(&g).is_err());
    }

    #[test]
    fn model_kind_round_trips_through_strings() {
        for k in ["mlp", "gcn", "sage", "egnn-gcn", "egnn-sage"] {
            assert_eq!(k.parse::<ModelKind>().unwrap().to_string(), k);
        }
        assert!("gat".parse::<ModelKind>().is_err());
    }
}
