//! Graph representation, normalized adjacency, splits, synthetic generation and I/O.

mod io;
mod sbm;
mod split;

pub use io::{load_graph, load_splits, save_graph, save_splits};
pub use sbm::{generate_sbm, SbmParams};
pub use split::{induce_training_subgraph, split_stratified, InducedSubgraph, SplitAssignment};

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Matrix};
use crate::scalar::Scalar;

/// Undirected node-classification graph.
///
/// Edges are stored once per undirected pair as `(u, v)` with `u < v`, sorted
/// and deduplicated. Input self-loops are dropped; the normalized adjacency
/// adds exactly one self-loop per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph<T> {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: Matrix<T>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl<T: Scalar> Graph<T> {
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Matrix<T>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows for {num_nodes} nodes",
                features.rows()
            )));
        }
        if labels.len() != num_nodes {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {num_nodes} nodes",
                labels.len()
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::InvalidGraph(format!(
                "label {y} of node {i} is not below num_classes = {num_classes}"
            )));
        }
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) has an endpoint >= {num_nodes}"
                )));
            }
            if u != v {
                canon.push((u.min(v), u.max(v)));
            }
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self {
            num_nodes,
            edges: canon,
            features,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Per-node degree in the undirected graph, self-loops excluded.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Scales every feature row to unit L1 norm; all-zero rows stay zero.
    pub fn row_normalize_features(&mut self) {
        for i in 0..self.num_nodes {
            let row = self.features.row_mut(i);
            let s: T = row.iter().map(|x| x.abs()).sum();
            if s > T::zero() {
                row.iter_mut().for_each(|x| *x /= s);
            }
        }
    }

    /// Returns a copy with a different edge set, same nodes/features/labels.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(
            self.num_nodes,
            edges,
            self.features.clone(),
            self.labels.clone(),
            self.num_classes,
        )
    }
}

/// Symmetrically normalized adjacency with self-loops, `D̃^{-1/2}(A+I)D̃^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency<T>(CsrMatrix<T>);

impl<T: Scalar> NormalizedAdjacency<T> {
    pub fn build(graph: &Graph<T>) -> Self {
        let n = graph.num_nodes();
        let inv_sqrt: Vec<T> = graph
            .degrees()
            .into_iter()
            .map(|d| T::one() / T::from_usize_lossy(d + 1).sqrt())
            .collect();
        let mut triplets = Vec::with_capacity(n + 2 * graph.edges().len());
        for i in 0..n {
            triplets.push((i, i, inv_sqrt[i] * inv_sqrt[i]));
        }
        for &(u, v) in graph.edges() {
            let w = inv_sqrt[u] * inv_sqrt[v];
            triplets.push((u, v, w));
            triplets.push((v, u, w));
        }
        Self(CsrMatrix::from_triplets(n, n, &triplets).expect("graph edges are validated"))
    }

    pub fn into_inner(self) -> CsrMatrix<T> {
        self.0
    }
}

impl<T> Deref for NormalizedAdjacency<T> {
    type Target = CsrMatrix<T>;

    fn deref(&self) -> &CsrMatrix<T> {
        &self.0
    }
}

/// Row-stochastic neighbour-mean operator: row `i` averages over `N(i)`, self excluded.
/// Isolated nodes get an all-zero row.
pub fn mean_aggregator<T: Scalar>(graph: &Graph<T>) -> CsrMatrix<T> {
    let n = graph.num_nodes();
    let deg = graph.degrees();
    let mut triplets = Vec::with_capacity(2 * graph.edges().len());
    for &(u, v) in graph.edges() {
        triplets.push((u, v, T::one() / T::from_usize_lossy(deg[u])));
        triplets.push((v, u, T::one() / T::from_usize_lossy(deg[v])));
    }
    CsrMatrix::from_triplets(n, n, &triplets).expect("graph edges are validated")
}

/// A graph bundled with the propagation operators the models need.
#[derive(Debug, Clone)]
pub struct PreparedGraph<T> {
    pub graph: Graph<T>,
    pub adjacency: NormalizedAdjacency<T>,
    pub mean_agg: CsrMatrix<T>,
    pub mean_agg_t: CsrMatrix<T>,
}

impl<T: Scalar> PreparedGraph<T> {
    pub fn new(graph: Graph<T>) -> Self {
        let adjacency = NormalizedAdjacency::build(&graph);
        let mean_agg = mean_aggregator(&graph);
        let mean_agg_t = mean_agg.transpose();
        Self {
            graph,
            adjacency,
            mean_agg,
            mean_agg_t,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn labels(&self) -> &[usize] {
        self.graph.labels()
    }
}
