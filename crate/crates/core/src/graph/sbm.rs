use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Planted-partition generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SbmParams {
    pub num_blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for SbmParams {
    fn default() -> Self {
        Self {
            num_blocks: 4,
            nodes_per_block: 100,
            p_in: 0.05,
            p_out: 0.01,
            feature_dim: 64,
            feature_noise: 2.5,
            seed: 0,
        }
    }
}

/// Generates a planted-partition graph.
///
/// Node `i` belongs to block `i / nodes_per_block`, which is also its label.
/// Each unordered pair is drawn once, with probability `p_in` inside a block
/// and `p_out` across blocks. Features are a per-block mean vector (standard
/// normal entries) plus isotropic Gaussian noise of scale `feature_noise`.
pub fn generate_sbm<T: Scalar>(params: &SbmParams) -> Result<Graph<T>> {
    let SbmParams {
        num_blocks,
        nodes_per_block,
        p_in,
        p_out,
        feature_dim,
        feature_noise,
        seed,
    } = *params;
    if nodes_per_block == 0 || num_blocks == 0 {
        return Err(Error::InvalidArgument(
            "num_blocks and nodes_per_block must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=p_in).contains(&p_out) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= p_out <= p_in <= 1, got p_in = {p_in}, p_out = {p_out}"
        )));
    }
    if feature_noise < 0.0 {
        return Err(Error::InvalidArgument("feature_noise must be >= 0".into()));
    }

    let n = num_blocks * nodes_per_block;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = |i: usize| i / nodes_per_block;

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block(u) == block(v) { p_in } else { p_out };
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }

    let means: Vec<Vec<f64>> = (0..num_blocks)
        .map(|_| {
            (0..feature_dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut feats = Vec::with_capacity(n * feature_dim);
    for i in 0..n {
        for mu in &means[block(i)] {
            let noise: f64 = rng.sample(StandardNormal);
            feats.push(T::lit(mu + feature_noise * noise));
        }
    }
    let features = Matrix::from_vec(n, feature_dim, feats)?;
    let labels = (0..n).map(block).collect();
    Graph::new(n, edges, features, labels, num_blocks)
}
