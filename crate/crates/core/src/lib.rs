//! Gradient-rewired model editing for small graph neural networks.
//!
//! The crate trains MLP / GCN / GraphSAGE node classifiers on a train-only
//! subgraph, then corrects single misclassified nodes with one of three
//! editors: plain gradient descent (GD), single-constraint rewiring (GRE) and
//! multi-constraint rewiring (GRE+). Rewiring projects the target-loss
//! gradient away from directions that would raise stored training-loss
//! gradients, solving a tiny non-negative QP in the dual.
//!
//! All numeric code is generic over [`Scalar`]; the `*64` aliases below fix
//! the scalar to `f64`, which is what the experiment harness uses.

pub mod diff;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod rewire;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Graph64 = graph::Graph<f64>;
pub type PreparedGraph64 = graph::PreparedGraph<f64>;
pub type ParamVector64 = diff::ParamVector<f64>;
pub type GradientVector64 = diff::GradientVector<f64>;
pub type Model64 = models::Model<f64>;
pub type AnchorGradientSet64 = rewire::AnchorGradientSet<f64>;
