//! Small non-negative QP: `min ½ vᵀPv + qᵀv  s.t. v ≥ 0` with `P` symmetric PSD.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Largest problem size accepted.
pub const MAX_QP_DIM: usize = 32;
/// Above this size the exact enumeration gives way to projected gradient.
pub const ENUMERATION_LIMIT: usize = 20;

/// KKT residuals of a candidate `v`, with `r = Pv + q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport<T> {
    /// `max |r_i|` over coordinates with `v_i > 0`.
    pub stationarity: T,
    /// `max(0, −min v_i)`.
    pub primal_feas: T,
    /// `max(0, −min r_i)`.
    pub dual_feas: T,
    /// `max |v_i r_i|`.
    pub comp_slack: T,
    /// `‖min(v, r)‖_∞`, the projected-gradient residual.
    pub residual: T,
    pub passed: bool,
}

fn check_shapes<T: Scalar>(p: &Matrix<T>, q: &[T]) -> Result<()> {
    if p.rows() != p.cols() || p.rows() != q.len() {
        return Err(Error::dim(
            "nonneg QP",
            format!("{0}x{0} matrix", q.len()),
            format!("{}x{}", p.rows(), p.cols()),
        ));
    }
    Ok(())
}

fn gradient<T: Scalar>(p: &Matrix<T>, q: &[T], v: &[T]) -> Vec<T> {
    (0..q.len())
        .map(|i| {
            p.row(i)
                .iter()
                .zip(v)
                .fold(q[i], |acc, (&pij, &vj)| acc + pij * vj)
        })
        .collect()
}

/// `½ vᵀPv + qᵀv`.
pub fn qp_objective<T: Scalar>(p: &Matrix<T>, q: &[T], v: &[T]) -> T {
    let half = T::lit(0.5);
    (0..q.len()).fold(T::zero(), |acc, i| {
        let pv: T = p.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum();
        acc + v[i] * (half * pv + q[i])
    })
}

pub fn check_kkt<T: Scalar>(p: &Matrix<T>, q: &[T], v: &[T], tol: T) -> Result<KktReport<T>> {
    check_shapes(p, q)?;
    if v.len() != q.len() {
        return Err(Error::dim("check_kkt", q.len(), v.len()));
    }
    let r = gradient(p, q, v);
    let zero = T::zero();
    let mut rep = KktReport {
        stationarity: zero,
        primal_feas: zero,
        dual_feas: zero,
        comp_slack: zero,
        residual: zero,
        passed: false,
    };
    for (&vi, &ri) in v.iter().zip(&r) {
        if vi > zero {
            rep.stationarity = rep.stationarity.max(ri.abs());
        }
        rep.primal_feas = rep.primal_feas.max(-vi);
        rep.dual_feas = rep.dual_feas.max(-ri);
        rep.comp_slack = rep.comp_slack.max((vi * ri).abs());
        rep.residual = rep.residual.max(vi.min(ri).abs());
    }
    rep.passed = rep.residual <= tol;
    Ok(rep)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and a matrix whose columns are the eigenvectors.
pub(crate) fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = a.rows();
    let mut m = a.clone();
    let mut vecs = Matrix::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..n {
            for j in 0..n {
                let x = m[(i, j)] * m[(i, j)];
                total += x;
                if i != j {
                    off += x;
                }
            }
        }
        if off <= eps * eps * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = vecs[(k, p)];
                    let vkq = vecs[(k, q)];
                    vecs[(k, p)] = c * vkp - s * vkq;
                    vecs[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), vecs)
}

/// Minimum-norm solution of `A x = b` for symmetric `A` via its pseudo-inverse.
pub(crate) fn pinv_solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Vec<T> {
    let n = a.rows();
    let (vals, vecs) = symmetric_eigen(a);
    let max = vals.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let cutoff = max * T::lit(1e-13) * T::from_usize_lossy(n.max(1));
    let mut x = vec![T::zero(); n];
    for (k, &lam) in vals.iter().enumerate() {
        if lam.abs() <= cutoff {
            continue;
        }
        let coef = (0..n).fold(T::zero(), |acc, i| acc + vecs[(i, k)] * b[i]) / lam;
        for i in 0..n {
            x[i] += coef * vecs[(i, k)];
        }
    }
    x
}

/// How a QP solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QpMethod {
    Enumeration,
    ProjectedGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T> {
    pub v: Vec<T>,
    pub objective: T,
    pub kkt: KktReport<T>,
    pub method: QpMethod,
}

/// Solves `min ½ vᵀPv + qᵀv  s.t. v ≥ 0`.
///
/// For `K ≤ 20` every subset `S` of free coordinates is tried: `P_SS v_S = −q_S`
/// is solved through the pseudo-inverse, the candidate is kept if `v_S ≥ −tol`,
/// the free gradient vanishes and the clamped gradient is `≥ −tol`, and the
/// feasible candidate with least objective wins. Larger problems fall back
/// to projected gradient. The problem is rescaled to unit max-entry first, so
/// `tol` is relative to the magnitude of `(P, q)`; the returned KKT report is
/// for the problem as given.
pub fn solve_nonneg_qp<T: Scalar>(p: &Matrix<T>, q: &[T], tol: T) -> Result<QpSolution<T>> {
    check_shapes(p, q)?;
    let k = q.len();
    if k > MAX_QP_DIM {
        return Err(Error::InvalidArgument(format!(
            "QP dimension {k} exceeds {MAX_QP_DIM}"
        )));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if p.as_slice().iter().chain(q).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("QP data".into()));
    }
    let scale = p
        .as_slice()
        .iter()
        .chain(q)
        .fold(T::zero(), |m, x| m.max(x.abs()));
    if k == 0 || scale == T::zero() {
        let v = vec![T::zero(); k];
        let kkt = check_kkt(p, q, &v, tol)?;
        return Ok(QpSolution {
            v,
            objective: T::zero(),
            kkt,
            method: QpMethod::Enumeration,
        });
    }
    let pn = p.map(|x| x / scale);
    let qn: Vec<T> = q.iter().map(|&x| x / scale).collect();

    let (v, method) = if k <= ENUMERATION_LIMIT {
        match enumerate_active_sets(&pn, &qn, tol) {
            Some(v) => (v, QpMethod::Enumeration),
            None => {
                log::warn!("no KKT candidate from enumeration; falling back to projected gradient");
                (projected_gradient(&pn, &qn, tol), QpMethod::ProjectedGradient)
            }
        }
    } else {
        (projected_gradient(&pn, &qn, tol), QpMethod::ProjectedGradient)
    };

    let scaled_kkt = check_kkt(&pn, &qn, &v, tol)?;
    if !scaled_kkt.passed {
        return Err(Error::QpFailure(format!(
            "KKT residual {} exceeds tolerance {}",
            scaled_kkt.residual, tol
        )));
    }
    let kkt = check_kkt(p, q, &v, tol * scale.max(T::one()))?;
    Ok(QpSolution {
        objective: qp_objective(p, q, &v),
        v,
        kkt,
        method,
    })
}

fn enumerate_active_sets<T: Scalar>(p: &Matrix<T>, q: &[T], tol: T) -> Option<Vec<T>> {
    let k = q.len();
    let mut best: Option<(T, Vec<T>)> = None;
    for mask in 0u32..(1u32 << k) {
        let free: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
        let mut v = vec![T::zero(); k];
        if !free.is_empty() {
            let mut sub = Matrix::zeros(free.len(), free.len());
            for (a, &i) in free.iter().enumerate() {
                for (b, &j) in free.iter().enumerate() {
                    sub[(a, b)] = p[(i, j)];
                }
            }
            let rhs: Vec<T> = free.iter().map(|&i| -q[i]).collect();
            let sol = pinv_solve(&sub, &rhs);
            if sol.iter().any(|&x| x < -tol || !x.is_finite()) {
                continue;
            }
            for (&i, &x) in free.iter().zip(&sol) {
                v[i] = x.max(T::zero());
            }
        }
        let r = gradient(p, q, &v);
        let vmax = v.iter().fold(T::one(), |m, &x| m.max(x.abs()));
        let ok = (0..k).all(|i| {
            if mask & (1 << i) != 0 {
                r[i].abs() <= tol * vmax
            } else {
                r[i] >= -tol
            }
        });
        if !ok {
            continue;
        }
        let obj = qp_objective(p, q, &v);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, v));
        }
    }
    best.map(|(_, v)| v)
}

fn projected_gradient<T: Scalar>(p: &Matrix<T>, q: &[T], tol: T) -> Vec<T> {
    let k = q.len();
    // Gershgorin bound on the largest eigenvalue
    let lmax = (0..k)
        .map(|i| p.row(i).iter().fold(T::zero(), |s, x| s + x.abs()))
        .fold(T::zero(), T::max);
    if lmax == T::zero() {
        return q.iter().map(|_| T::zero()).collect();
    }
    let step = T::one() / lmax;
    let mut v = vec![T::zero(); k];
    let mut y = v.clone();
    let mut t = T::one();
    for _ in 0..200_000 {
        let r = gradient(p, q, &y);
        let next: Vec<T> = y
            .iter()
            .zip(&r)
            .map(|(&yi, &ri)| (yi - step * ri).max(T::zero()))
            .collect();
        let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0);
        let momentum = (t - T::one()) / t_next;
        y = next
            .iter()
            .zip(&v)
            .map(|(&n, &o)| (n + momentum * (n - o)).max(T::zero()))
            .collect();
        v = next;
        t = t_next;
        let rv = gradient(p, q, &v);
        let res = v
            .iter()
            .zip(&rv)
            .fold(T::zero(), |m, (&a, &b)| m.max(a.min(b).abs()));
        if res <= tol * T::lit(0.1) {
            break;
        }
    }
    v
}
