use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub fn relu<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    x.map(|v| v.max(T::zero()))
}

/// Output of [`dropout`]; `mask` holds the per-entry multiplier (0 or 1/(1−rate)).
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    pub output: Matrix<T>,
    pub mask: Option<Vec<T>>,
}

/// Inverted dropout. Identity when `training` is false or `rate` is zero.
pub fn dropout<T: Scalar>(x: &Matrix<T>, rate: f64, seed: u64, training: bool) -> Result<Dropout<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok(Dropout {
            output: x.clone(),
            mask: None,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = T::lit(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.as_slice().len())
        .map(|_| {
            if rng.random_bool(1.0 - rate) {
                keep
            } else {
                T::zero()
            }
        })
        .collect();
    let mut output = x.clone();
    for (o, &m) in output.as_mut_slice().iter_mut().zip(&mask) {
        *o *= m;
    }
    Ok(Dropout {
        output,
        mask: Some(mask),
    })
}

/// Weighted node selection for a cross-entropy loss.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSelection<T> {
    pub nodes: Vec<usize>,
    pub labels: Vec<usize>,
    pub weights: Vec<T>,
}

impl<T: Scalar> NodeSelection<T> {
    /// Uniform weights `1/|nodes|`, labels looked up in `all_labels`.
    pub fn mean(nodes: Vec<usize>, all_labels: &[usize]) -> Self {
        let labels = nodes.iter().map(|&i| all_labels[i]).collect();
        Self::mean_with_labels(nodes, labels)
    }

    /// Uniform weights with explicit per-node targets.
    pub fn mean_with_labels(nodes: Vec<usize>, labels: Vec<usize>) -> Self {
        let w = if nodes.is_empty() {
            T::zero()
        } else {
            T::one() / T::from_usize_lossy(nodes.len())
        };
        let weights = vec![w; nodes.len()];
        Self {
            nodes,
            labels,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Weighted mean of `−log softmax(logits[i])[label_i]` and its gradient w.r.t. the logits.
///
/// Rows outside the selection receive zero gradient.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Matrix<T>,
    selection: &NodeSelection<T>,
) -> Result<(T, Matrix<T>)> {
    if selection.is_empty() {
        return Err(Error::EmptySelection);
    }
    if selection.labels.len() != selection.len() || selection.weights.len() != selection.len() {
        return Err(Error::dim(
            "softmax_cross_entropy",
            selection.len(),
            format!(
                "{} labels / {} weights",
                selection.labels.len(),
                selection.weights.len()
            ),
        ));
    }
    let c = logits.cols();
    let mut loss = T::zero();
    let mut grad = Matrix::zeros(logits.rows(), c);
    for ((&i, &y), &w) in selection
        .nodes
        .iter()
        .zip(&selection.labels)
        .zip(&selection.weights)
    {
        if i >= logits.rows() || y >= c {
            return Err(Error::dim(
                "softmax_cross_entropy",
                format!("node < {}, label < {c}", logits.rows()),
                format!("node {i}, label {y}"),
            ));
        }
        let row = logits.row(i);
        let (arg, max) = row
            .iter()
            .copied()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, bv), (j, v)| {
                if v > bv {
                    (j, v)
                } else {
                    (bi, bv)
                }
            });
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        // ln Σ exp(z−max) = ln(1 + Σ_{j≠argmax} exp(z_j−max)), kept exact for saturated rows
        let rest: T = exps
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != arg)
            .map(|(_, &e)| e)
            .sum();
        let log_norm = rest.ln_1p();
        loss += w * (max - row[y] + log_norm);
        let denom = T::one() + rest;
        let g = grad.row_mut(i);
        for (j, (gj, &e)) in g.iter_mut().zip(&exps).enumerate() {
            let p = e / denom;
            let target = if j == y { T::one() } else { T::zero() };
            *gj += w * (p - target);
        }
    }
    Ok((loss, grad))
}
