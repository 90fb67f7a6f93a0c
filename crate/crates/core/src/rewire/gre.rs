//! Gradient rewiring: project the target-loss gradient so it no longer
//! increases any anchored training loss to first order, then shrink it by
//! `(1+λ)^{-1}`.
//!
//! Primal problem, for anchor rows `g^k`:
//!
//! ```text
//! min_g ½‖g − g_tg‖² + (λ/2)‖g‖²   s.t.  (g^k)ᵀ g ≥ 0  for all k
//! ```
//!
//! Stationarity gives `(1+λ) g = g_tg + Σ_k v_k g^k` with multipliers `v ≥ 0`.
//! The multipliers solve a K-variable non-negative QP whose data are the Gram
//! matrix `G Gᵀ` and `G g_tg`; `(1+λ)^{-1}` scales that whole objective, so
//! `v*` does not depend on `λ`.

use super::qp::{solve_nonneg_qp, KktReport};
use crate::diff::GradientVector;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Squared norm under which an anchor row is treated as zero and dropped.
pub const DEGENERATE_NORM_SQ: f64 = 1e-30;

/// Dual QP of the rewiring problem: `P = (1+λ)^{-1} G Gᵀ`, `q = (1+λ)^{-1} G g_tg`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<T> {
    gram: Matrix<T>,
    cross: Vec<T>,
    shrink: T,
}

impl<T: Scalar> QpProblem<T> {
    pub fn build(rows: &[&GradientVector<T>], g_tg: &GradientVector<T>, lambda: T) -> Result<Self> {
        let k = rows.len();
        let mut gram = Matrix::zeros(k, k);
        let mut cross = Vec::with_capacity(k);
        for i in 0..k {
            for j in 0..=i {
                let d = rows[i].dot(rows[j])?;
                gram[(i, j)] = d;
                gram[(j, i)] = d;
            }
            cross.push(rows[i].dot(g_tg)?);
        }
        Ok(Self {
            gram,
            cross,
            shrink: T::one() / (T::one() + lambda),
        })
    }

    pub fn dim(&self) -> usize {
        self.cross.len()
    }

    /// `G Gᵀ`.
    pub fn gram(&self) -> &Matrix<T> {
        &self.gram
    }

    /// `G g_tg`.
    pub fn cross(&self) -> &[T] {
        &self.cross
    }

    pub fn p(&self) -> Matrix<T> {
        self.gram.map(|x| x * self.shrink)
    }

    pub fn q(&self) -> Vec<T> {
        self.cross.iter().map(|&x| x * self.shrink).collect()
    }
}

/// A rewired gradient with its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Rewired<T> {
    pub gradient: GradientVector<T>,
    /// Optimal multipliers, one per anchor row (zero for dropped rows).
    pub dual: Vec<T>,
    /// Indices of anchor rows dropped as degenerate.
    pub dropped: Vec<usize>,
    /// KKT report of the dual solve, when a QP was solved.
    pub kkt: Option<KktReport<T>>,
}

impl<T: Scalar> Rewired<T> {
    /// `min_k (g^k)ᵀ g* / (‖g^k‖ ‖g*‖)`, or `+∞` when undefined.
    pub fn worst_alignment(&self, rows: &[&GradientVector<T>]) -> Result<T> {
        let gn = self.gradient.norm();
        let mut worst = T::infinity();
        for row in rows {
            let denom = row.norm() * gn;
            if denom > T::zero() {
                worst = worst.min(row.dot(&self.gradient)? / denom);
            }
        }
        Ok(worst)
    }
}

fn is_degenerate<T: Scalar>(g: &GradientVector<T>) -> bool {
    g.norm_sq().as_f64() < DEGENERATE_NORM_SQ
}

/// `(g_tg + Σ_k v_k g^k) / (1+λ)`, accumulated coordinatewise in row order.
fn recover<T: Scalar>(g_tg: &GradientVector<T>, rows: &[&GradientVector<T>], v: &[T], lambda: T) -> GradientVector<T> {
    let denom = T::one() + lambda;
    let mut out = g_tg.clone();
    for (i, x) in out.as_mut_slice().iter_mut().enumerate() {
        let mut acc = *x;
        for (row, &vk) in rows.iter().zip(v) {
            if vk != T::zero() {
                acc += vk * row.as_slice()[i];
            }
        }
        *x = acc / denom;
    }
    out
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// Single-constraint closed form: `v* = max(0, −g_trainᵀg_tg / ‖g_train‖²)`,
/// `g* = (g_tg + v* g_train) / (1+λ)`.
///
/// A zero anchor (squared norm below `1e-30`) drops the constraint.
pub fn gre_rewire<T: Scalar>(g_tg: &GradientVector<T>, g_train: &GradientVector<T>, lambda: T) -> Result<Rewired<T>> {
    check_lambda(lambda)?;
    let dot = g_train.dot(g_tg)?;
    if is_degenerate(g_train) {
        log::warn!("degenerate anchor gradient; rewiring reduces to scaling");
        return Ok(Rewired {
            gradient: recover(g_tg, &[], &[], lambda),
            dual: vec![T::zero()],
            dropped: vec![0],
            kkt: None,
        });
    }
    let v = (-dot / g_train.norm_sq()).max(T::zero());
    Ok(Rewired {
        gradient: recover(g_tg, &[g_train], &[v], lambda),
        dual: vec![v],
        dropped: Vec::new(),
        kkt: None,
    })
}

/// Multi-constraint rewiring through the K-variable dual QP.
pub fn gre_plus_rewire<T: Scalar>(
    g_tg: &GradientVector<T>,
    rows: &[&GradientVector<T>],
    lambda: T,
    tolerance: T,
) -> Result<Rewired<T>> {
    check_lambda(lambda)?;
    let (kept, dropped): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&k| !is_degenerate(rows[k]));
    if !dropped.is_empty() {
        log::warn!("dropping {} degenerate anchor row(s)", dropped.len());
    }
    let active: Vec<&GradientVector<T>> = kept.iter().map(|&k| rows[k]).collect();
    let problem = QpProblem::build(&active, g_tg, lambda)?;
    // (1+λ)^{-1} scales the dual objective uniformly; solving on the unscaled
    // Gram data gives the same v* for every λ.
    let solution = solve_nonneg_qp(problem.gram(), problem.cross(), tolerance)?;
    let mut dual = vec![T::zero(); rows.len()];
    for (&k, &v) in kept.iter().zip(&solution.v) {
        dual[k] = v;
    }
    Ok(Rewired {
        gradient: recover(g_tg, &active, &solution.v, lambda),
        dual,
        dropped,
        kkt: Some(solution.kkt),
    })
}
