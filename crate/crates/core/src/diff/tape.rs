//! Fixed-topology reverse-mode tape.
//!
//! The models are short chains of known layer types, optionally run as
//! parallel branches whose logits are summed (the EGNN wrapper). Each layer
//! pushes one op recording exactly what its backward rule needs.

use super::ops::{self, NodeSelection};
use super::params::{GradientVector, ParamVector};
use crate::error::{Error, Result};
use crate::graph::PreparedGraph;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

enum TapeOp<T> {
    Dense {
        input: Matrix<T>,
        weight: usize,
        bias: usize,
        input_grad: bool,
    },
    Gcn {
        input: Matrix<T>,
        weight: usize,
        bias: usize,
        input_grad: bool,
    },
    Sage {
        input: Matrix<T>,
        aggregated: Matrix<T>,
        weight_self: usize,
        weight_neigh: usize,
        bias: usize,
        input_grad: bool,
    },
    Relu {
        active: Vec<bool>,
    },
    Dropout {
        mask: Vec<T>,
    },
}

/// Records a forward pass over one graph and parameter vector.
///
/// With `recording` off the same layer calls only compute values, which is
/// what evaluation uses.
pub struct Tape<'a, T> {
    graph: &'a PreparedGraph<T>,
    params: &'a ParamVector<T>,
    recording: bool,
    branches: Vec<Vec<TapeOp<T>>>,
    logits: Option<Matrix<T>>,
    dlogits: Option<Matrix<T>>,
}

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new(graph: &'a PreparedGraph<T>, params: &'a ParamVector<T>, recording: bool) -> Self {
        Self {
            graph,
            params,
            recording,
            branches: Vec::new(),
            logits: None,
            dlogits: None,
        }
    }

    pub fn graph(&self) -> &'a PreparedGraph<T> {
        self.graph
    }

    pub fn begin_branch(&mut self) {
        self.branches.push(Vec::new());
    }

    fn push(&mut self, op: TapeOp<T>) {
        if self.recording {
            self.branches
                .last_mut()
                .expect("begin_branch called before recording ops")
                .push(op);
        }
    }

    /// `X W + b`.
    pub fn dense(&mut self, x: &Matrix<T>, weight: usize, bias: usize, input_grad: bool) -> Result<Matrix<T>> {
        let out = crate::linalg::affine(x, &self.params.matrix(weight), self.params.tensor(bias))?;
        self.push(TapeOp::Dense {
            input: x.clone(),
            weight,
            bias,
            input_grad,
        });
        Ok(out)
    }

    /// `Ã (X W) + b`.
    pub fn gcn(&mut self, x: &Matrix<T>, weight: usize, bias: usize, input_grad: bool) -> Result<Matrix<T>> {
        let xw = x.matmul(&self.params.matrix(weight))?;
        let mut out = self.graph.adjacency.spmm(&xw)?;
        out.add_row_broadcast(self.params.tensor(bias))?;
        self.push(TapeOp::Gcn {
            input: x.clone(),
            weight,
            bias,
            input_grad,
        });
        Ok(out)
    }

    /// `X W_self + (M X) W_neigh + b` with `M` the neighbour-mean operator.
    pub fn sage(
        &mut self,
        x: &Matrix<T>,
        weight_self: usize,
        weight_neigh: usize,
        bias: usize,
        input_grad: bool,
    ) -> Result<Matrix<T>> {
        let aggregated = self.graph.mean_agg.spmm(x)?;
        let mut out = x.matmul(&self.params.matrix(weight_self))?;
        out.add_assign(&aggregated.matmul(&self.params.matrix(weight_neigh))?)?;
        out.add_row_broadcast(self.params.tensor(bias))?;
        self.push(TapeOp::Sage {
            input: x.clone(),
            aggregated,
            weight_self,
            weight_neigh,
            bias,
            input_grad,
        });
        Ok(out)
    }

    pub fn relu(&mut self, x: &Matrix<T>) -> Matrix<T> {
        if self.recording {
            let active = x.as_slice().iter().map(|&v| v > T::zero()).collect();
            self.push(TapeOp::Relu { active });
        }
        ops::relu(x)
    }

    pub fn dropout(&mut self, x: Matrix<T>, rate: f64, seed: u64, training: bool) -> Result<Matrix<T>> {
        let d = ops::dropout(&x, rate, seed, training)?;
        if let Some(mask) = d.mask {
            self.push(TapeOp::Dropout { mask });
        }
        Ok(d.output)
    }

    /// Adds a branch output into the running logits.
    pub fn end_branch(&mut self, out: Matrix<T>) -> Result<()> {
        match &mut self.logits {
            None => self.logits = Some(out),
            Some(acc) => acc.add_assign(&out)?,
        }
        Ok(())
    }

    pub fn logits(&self) -> Option<&Matrix<T>> {
        self.logits.as_ref()
    }

    pub fn into_logits(self) -> Option<Matrix<T>> {
        self.logits
    }

    /// Attaches a cross-entropy loss to the recorded logits and returns its value.
    pub fn attach_loss(&mut self, selection: &NodeSelection<T>) -> Result<T> {
        let logits = self.logits.as_ref().ok_or(Error::EmptyTape)?;
        let (loss, dlogits) = ops::softmax_cross_entropy(logits, selection)?;
        self.dlogits = Some(dlogits);
        Ok(loss)
    }

    /// Exact gradient of the attached loss w.r.t. every parameter coordinate.
    pub fn backward(&self) -> Result<GradientVector<T>> {
        if !self.recording || self.branches.is_empty() {
            return Err(Error::EmptyTape);
        }
        let dlogits = self.dlogits.as_ref().ok_or(Error::EmptyTape)?;
        let mut grad = GradientVector::zeros(self.params.layout().clone());
        for branch in &self.branches {
            self.backward_branch(branch, dlogits.clone(), &mut grad)?;
        }
        Ok(grad)
    }

    fn accumulate(&self, grad: &mut GradientVector<T>, tensor: usize, values: &[T]) {
        let range = self.params.layout().get(tensor).range();
        for (g, &v) in grad.as_mut_slice()[range].iter_mut().zip(values) {
            *g += v;
        }
    }

    fn backward_branch(
        &self,
        ops: &[TapeOp<T>],
        mut upstream: Matrix<T>,
        grad: &mut GradientVector<T>,
    ) -> Result<()> {
        for op in ops.iter().rev() {
            match op {
                TapeOp::Dropout { mask } => {
                    for (u, &m) in upstream.as_mut_slice().iter_mut().zip(mask) {
                        *u *= m;
                    }
                }
                TapeOp::Relu { active } => {
                    for (u, &a) in upstream.as_mut_slice().iter_mut().zip(active) {
                        if !a {
                            *u = T::zero();
                        }
                    }
                }
                TapeOp::Dense {
                    input,
                    weight,
                    bias,
                    input_grad,
                } => {
                    self.accumulate(grad, *weight, input.matmul_tn(&upstream)?.as_slice());
                    self.accumulate(grad, *bias, &upstream.column_sums());
                    if *input_grad {
                        upstream = upstream.matmul_nt(&self.params.matrix(*weight))?;
                    }
                }
                TapeOp::Gcn {
                    input,
                    weight,
                    bias,
                    input_grad,
                } => {
                    self.accumulate(grad, *bias, &upstream.column_sums());
                    // Ã is symmetric, so Ãᵀ·up = Ã·up
                    let through_adj = self.graph.adjacency.spmm(&upstream)?;
                    self.accumulate(grad, *weight, input.matmul_tn(&through_adj)?.as_slice());
                    if *input_grad {
                        upstream = through_adj.matmul_nt(&self.params.matrix(*weight))?;
                    }
                }
                TapeOp::Sage {
                    input,
                    aggregated,
                    weight_self,
                    weight_neigh,
                    bias,
                    input_grad,
                } => {
                    self.accumulate(grad, *bias, &upstream.column_sums());
                    self.accumulate(grad, *weight_self, input.matmul_tn(&upstream)?.as_slice());
                    self.accumulate(grad, *weight_neigh, aggregated.matmul_tn(&upstream)?.as_slice());
                    if *input_grad {
                        let mut down = upstream.matmul_nt(&self.params.matrix(*weight_self))?;
                        let neigh = upstream.matmul_nt(&self.params.matrix(*weight_neigh))?;
                        down.add_assign(&self.graph.mean_agg_t.spmm(&neigh)?)?;
                        upstream = down;
                    }
                }
            }
        }
        Ok(())
    }
}
