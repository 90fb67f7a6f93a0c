use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// One named tensor inside a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered, contiguous tensor descriptors.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParamLayout {
    tensors: Vec<TensorSpec>,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// A layout holding one `1 × len` tensor, for working with raw vectors.
    pub fn flat(len: usize) -> Arc<Self> {
        let mut layout = Self::new();
        layout.push("theta", 1, len);
        Arc::new(layout)
    }

    /// Appends a tensor and returns its index.
    pub fn push(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> usize {
        let offset = self.len();
        self.tensors.push(TensorSpec {
            name: name.into(),
            rows,
            cols,
            offset,
        });
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.last().map_or(0, |t| t.offset + t.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn get(&self, index: usize) -> &TensorSpec {
        &self.tensors[index]
    }

    pub fn find(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Checks that offsets are contiguous and start at zero.
    pub fn validate(&self) -> Result<()> {
        let mut expected = 0;
        for t in &self.tensors {
            if t.offset != expected {
                return Err(Error::InvalidArgument(format!(
                    "tensor {} at offset {} but expected {expected}",
                    t.name, t.offset
                )));
            }
            expected += t.len();
        }
        Ok(())
    }
}

fn same_layout(a: &Arc<ParamLayout>, b: &Arc<ParamLayout>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Flat model parameters `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T> {
    data: Vec<T>,
    layout: Arc<ParamLayout>,
}

impl<T: Scalar> ParamVector<T> {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        Self {
            data: vec![T::zero(); layout.len()],
            layout,
        }
    }

    pub fn from_vec(layout: Arc<ParamLayout>, data: Vec<T>) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::dim("ParamVector::from_vec", layout.len(), data.len()));
        }
        Ok(Self { data, layout })
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn tensor(&self, index: usize) -> &[T] {
        &self.data[self.layout.get(index).range()]
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut [T] {
        let range = self.layout.get(index).range();
        &mut self.data[range]
    }

    /// Copies tensor `index` out as a matrix.
    pub fn matrix(&self, index: usize) -> Matrix<T> {
        let spec = self.layout.get(index);
        Matrix::from_vec(spec.rows, spec.cols, self.tensor(index).to_vec())
            .expect("tensor spec matches its span")
    }

    /// `θ ← θ − step · g`.
    pub fn descend(&mut self, step: T, grad: &GradientVector<T>) -> Result<()> {
        if !same_layout(&self.layout, &grad.layout) {
            return Err(Error::LayoutMismatch);
        }
        for (p, &g) in self.data.iter_mut().zip(&grad.data) {
            *p -= step * g;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Gradient aligned with a [`ParamVector`] layout. Value type; all algebra
/// checks layout compatibility.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector<T> {
    data: Vec<T>,
    layout: Arc<ParamLayout>,
}

impl<T: Scalar> GradientVector<T> {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        Self {
            data: vec![T::zero(); layout.len()],
            layout,
        }
    }

    pub fn from_vec(layout: Arc<ParamLayout>, data: Vec<T>) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::dim(
                "GradientVector::from_vec",
                layout.len(),
                data.len(),
            ));
        }
        Ok(Self { data, layout })
    }

    /// Wraps a raw vector in a single-tensor layout.
    pub fn from_flat(data: Vec<T>) -> Self {
        Self {
            layout: ParamLayout::flat(data.len()),
            data,
        }
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn compatible(&self, other: &Self) -> bool {
        same_layout(&self.layout, &other.layout)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::LayoutMismatch)
        }
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        self.check(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &a| acc + a * a)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    /// `self ← self + alpha · x`.
    pub fn axpy(&mut self, alpha: T, x: &Self) -> Result<()> {
        self.check(x)?;
        for (s, &v) in self.data.iter_mut().zip(&x.data) {
            *s += alpha * v;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: T) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
            layout: self.layout.clone(),
        })
    }

    /// Zeroes every coordinate whose mask entry is false.
    pub fn mask(&mut self, keep: &[bool]) -> Result<()> {
        if keep.len() != self.data.len() {
            return Err(Error::dim("GradientVector::mask", self.data.len(), keep.len()));
        }
        for (g, &k) in self.data.iter_mut().zip(keep) {
            if !k {
                *g = T::zero();
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
