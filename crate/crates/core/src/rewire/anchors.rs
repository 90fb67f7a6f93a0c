//! Training-loss gradients captured before editing, and their persistence.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::qp::MAX_QP_DIM;
use crate::diff::{GradientVector, NodeSelection};
use crate::error::{Error, Result};
use crate::graph::PreparedGraph;
use crate::models::{GradScope, Mode, Model};
use crate::scalar::Scalar;

/// `K` training-subset gradients, `row k = ∇θ mean-CE over subset k`,
/// restricted to the model's editable coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorGradientSet<T> {
    rows: Vec<GradientVector<T>>,
    subsets: Vec<Vec<usize>>,
    fingerprint: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnchorsFile {
    k: usize,
    num_params: usize,
    subsets: Vec<Vec<usize>>,
    fingerprint: String,
}

impl<T: Scalar> AnchorGradientSet<T> {
    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[GradientVector<T>] {
        &self.rows
    }

    pub fn row_refs(&self) -> Vec<&GradientVector<T>> {
        self.rows.iter().collect()
    }

    /// Node ids of each subset (in the id space of the capture graph unless remapped).
    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Rewrites subset node ids through `index_map[local] = original`.
    pub fn remap_nodes(mut self, index_map: &[usize]) -> Self {
        for subset in &mut self.subsets {
            for id in subset.iter_mut() {
                *id = index_map[*id];
            }
        }
        self
    }

    pub fn check_model(&self, model: &Model<T>) -> Result<()> {
        let got = model.fingerprint();
        if got != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint.clone(),
                got,
            });
        }
        Ok(())
    }
}

/// Shuffles every node of `train_graph` with `seed`, deals them round-robin
/// into `k` subsets, and stores each subset's mean-CE gradient on the
/// editable coordinates (evaluation mode). Subsets are kept sorted, so `k = 1`
/// reproduces the full training gradient exactly.
pub fn capture_anchors<T: Scalar>(
    model: &Model<T>,
    train_graph: &PreparedGraph<T>,
    k: usize,
    seed: u64,
) -> Result<AnchorGradientSet<T>> {
    let n = train_graph.num_nodes();
    if k == 0 || k > MAX_QP_DIM {
        return Err(Error::InvalidArgument(format!(
            "K must be in 1..={MAX_QP_DIM}, got {k}"
        )));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "K = {k} exceeds the {n} training nodes"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut subsets = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, node) in order.into_iter().enumerate() {
        subsets[pos % k].push(node);
    }
    subsets.iter_mut().for_each(|s| s.sort_unstable());

    let rows = subsets
        .iter()
        .map(|subset| {
            let selection = NodeSelection::mean(subset.clone(), train_graph.labels());
            model
                .loss_and_grad(train_graph, &selection, Mode::Eval, GradScope::Editable)
                .map(|(_, g)| g)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnchorGradientSet {
        rows,
        subsets,
        fingerprint: model.fingerprint(),
    })
}

/// Writes `anchors.f64` (K·L little-endian `f64`) and `anchors.json`.
pub fn save_anchors<T: Scalar>(dir: impl AsRef<Path>, anchors: &AnchorGradientSet<T>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = AnchorsFile {
        k: anchors.k(),
        num_params: anchors.rows.first().map_or(0, GradientVector::len),
        subsets: anchors.subsets.clone(),
        fingerprint: anchors.fingerprint.clone(),
    };
    let json_path = dir.join("anchors.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::json(&json_path, e))?;
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    let bytes: Vec<u8> = anchors
        .rows
        .iter()
        .flat_map(|r| r.as_slice().iter().flat_map(|x| x.as_f64().to_le_bytes()))
        .collect();
    let bin_path = dir.join("anchors.f64");
    fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))
}

/// Loads an anchor set and checks it was captured from `model`.
pub fn load_anchors<T: Scalar>(dir: impl AsRef<Path>, model: &Model<T>) -> Result<AnchorGradientSet<T>> {
    let dir = dir.as_ref();
    let json_path = dir.join("anchors.json");
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let meta: AnchorsFile = serde_json::from_str(&text).map_err(|e| Error::json(&json_path, e))?;
    let got = model.fingerprint();
    if got != meta.fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: meta.fingerprint,
            got,
        });
    }
    let layout = model.params().layout().clone();
    let bin_path = dir.join("anchors.f64");
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let l = layout.len();
    if meta.num_params != l || bytes.len() != meta.k * l * 8 || meta.subsets.len() != meta.k {
        return Err(Error::Parse {
            path: bin_path,
            line: 0,
            msg: format!(
                "expected {} rows of {l} values, found {} bytes",
                meta.k,
                bytes.len()
            ),
        });
    }
    let values: Vec<T> = bytes
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    let rows = values
        .chunks(l.max(1))
        .take(meta.k)
        .map(|chunk| GradientVector::from_vec(layout.clone(), chunk.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnchorGradientSet {
        rows,
        subsets: meta.subsets,
        fingerprint: meta.fingerprint,
    })
}
