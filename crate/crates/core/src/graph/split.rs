use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Disjoint train/valid/test node masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train_mask: Vec<bool>,
    pub valid_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
    pub seed: u64,
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect()
}

impl SplitAssignment {
    pub fn from_indices(
        num_nodes: usize,
        train: &[usize],
        valid: &[usize],
        test: &[usize],
        seed: u64,
    ) -> Result<Self> {
        let mut masks = [
            vec![false; num_nodes],
            vec![false; num_nodes],
            vec![false; num_nodes],
        ];
        let mut seen = vec![false; num_nodes];
        for (mask, ids) in masks.iter_mut().zip([train, valid, test]) {
            for &i in ids {
                if i >= num_nodes {
                    return Err(Error::InvalidGraph(format!(
                        "split index {i} out of range for {num_nodes} nodes"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidGraph(format!(
                        "node {i} appears in more than one split"
                    )));
                }
                seen[i] = true;
                mask[i] = true;
            }
        }
        let [train_mask, valid_mask, test_mask] = masks;
        Ok(Self {
            train_mask,
            valid_mask,
            test_mask,
            seed,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.train_mask.len()
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        indices(&self.train_mask)
    }

    pub fn valid_nodes(&self) -> Vec<usize> {
        indices(&self.valid_mask)
    }

    pub fn test_nodes(&self) -> Vec<usize> {
        indices(&self.test_mask)
    }
}

/// Per-class stratified split.
///
/// Each class is shuffled with one seeded stream (classes visited in index
/// order); the first `train_per_class` nodes go to train, the next
/// `valid_per_class` to valid, the rest to test. A class with fewer than
/// `train_per_class + valid_per_class` nodes puts `floor(0.6·n_c)` into train
/// and the remainder into valid.
pub fn split_stratified(
    labels: &[usize],
    num_classes: usize,
    train_per_class: usize,
    valid_per_class: usize,
    seed: u64,
) -> Result<SplitAssignment> {
    let n = labels.len();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::InvalidGraph(format!(
                "label {y} of node {i} is not below num_classes = {num_classes}"
            )));
        }
        by_class[y].push(i);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!("class {c} has no nodes")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = SplitAssignment {
        train_mask: vec![false; n],
        valid_mask: vec![false; n],
        test_mask: vec![false; n],
        seed,
    };
    for mut nodes in by_class {
        nodes.shuffle(&mut rng);
        let size = nodes.len();
        let (n_train, n_valid) = if size >= train_per_class + valid_per_class {
            (train_per_class, valid_per_class)
        } else {
            let t = size * 3 / 5;
            (t, size - t)
        };
        for (rank, &i) in nodes.iter().enumerate() {
            if rank < n_train {
                split.train_mask[i] = true;
            } else if rank < n_train + n_valid {
                split.valid_mask[i] = true;
            } else {
                split.test_mask[i] = true;
            }
        }
    }
    Ok(split)
}

/// Train-only subgraph plus the map from local to original node ids.
#[derive(Debug, Clone)]
pub struct InducedSubgraph<T> {
    pub graph: Graph<T>,
    /// `index_map[local] = original`.
    pub index_map: Vec<usize>,
}

/// Keeps the training nodes and the edges with both endpoints among them.
pub fn induce_training_subgraph<T: Scalar>(
    graph: &Graph<T>,
    split: &SplitAssignment,
) -> Result<InducedSubgraph<T>> {
    if split.num_nodes() != graph.num_nodes() {
        return Err(Error::dim(
            "induce_training_subgraph",
            graph.num_nodes(),
            split.num_nodes(),
        ));
    }
    let index_map = split.train_nodes();
    let mut local = vec![usize::MAX; graph.num_nodes()];
    for (l, &orig) in index_map.iter().enumerate() {
        local[orig] = l;
    }
    let edges = graph.edges().iter().filter_map(|&(u, v)| {
        (split.train_mask[u] && split.train_mask[v]).then(|| (local[u], local[v]))
    });
    let d = graph.feature_dim();
    let mut feats = Vec::with_capacity(index_map.len() * d);
    for &orig in &index_map {
        feats.extend_from_slice(graph.features().row(orig));
    }
    let features = crate::linalg::Matrix::from_vec(index_map.len(), d, feats)?;
    let labels = index_map.iter().map(|&i| graph.labels()[i]).collect();
    let sub = Graph::new(index_map.len(), edges, features, labels, graph.num_classes())?;
    Ok(InducedSubgraph {
        graph: sub,
        index_map,
    })
}
