//! Anchor gradients, GRE / GRE+ rewiring and the non-negative QP solver.

mod anchors;
mod gre;
mod qp;

pub use anchors::{capture_anchors, load_anchors, save_anchors, AnchorGradientSet};
pub use gre::{gre_plus_rewire, gre_rewire, QpProblem, Rewired, DEGENERATE_NORM_SQ};
pub use qp::{
    check_kkt, qp_objective, solve_nonneg_qp, KktReport, QpMethod, QpSolution, ENUMERATION_LIMIT,
    MAX_QP_DIM,
};

use serde::{Deserialize, Serialize};

/// Penalty weight, subset count and solver tolerance for rewiring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewireConfig {
    pub lambda: f64,
    pub k: usize,
    pub tolerance: f64,
}

impl Default for RewireConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            k: 1,
            tolerance: 1e-10,
        }
    }
}

impl RewireConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(crate::Error::InvalidArgument(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(crate::Error::InvalidArgument("tolerance must be > 0".into()));
        }
        if self.k == 0 || self.k > MAX_QP_DIM {
            return Err(crate::Error::InvalidArgument(format!(
                "K must be in 1..={MAX_QP_DIM}"
            )));
        }
        Ok(())
    }
}
