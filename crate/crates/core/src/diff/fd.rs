use super::params::{GradientVector, ParamVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Central-difference gradient `(f(θ+εe_i) − f(θ−εe_i)) / 2ε` for every coordinate.
pub fn finite_diff_gradient<T, F>(f: F, theta: &ParamVector<T>, eps: T) -> Result<GradientVector<T>>
where
    T: Scalar,
    F: Fn(&ParamVector<T>) -> Result<T>,
{
    if eps <= T::zero() {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let mut probe = theta.clone();
    let mut out = Vec::with_capacity(theta.len());
    let two_eps = eps + eps;
    for i in 0..theta.len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + eps;
        let plus = f(&probe)?;
        probe.as_mut_slice()[i] = orig - eps;
        let minus = f(&probe)?;
        probe.as_mut_slice()[i] = orig;
        out.push((plus - minus) / two_eps);
    }
    GradientVector::from_vec(theta.layout().clone(), out)
}
