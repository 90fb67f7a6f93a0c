//! Numeric kernels with exact reverse-mode gradients and a finite-difference oracle.

mod fd;
mod ops;
mod params;
mod tape;

pub use fd::finite_diff_gradient;
pub use ops::{dropout, relu, softmax_cross_entropy, Dropout, NodeSelection};
pub use params::{GradientVector, ParamLayout, ParamVector, TensorSpec};
pub use tape::Tape;

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::error::Error;
    use crate::graph::{Graph, PreparedGraph};
    use crate::linalg::Matrix;

    fn single_layer() -> (PreparedGraph<f64>, ParamVector<f64>, usize, usize) {
        let x = Matrix::from_vec(1, 2, vec![0.5, -2.0]).unwrap();
        let g = PreparedGraph::new(Graph::new(1, vec![], x, vec![1], 3).unwrap());
        let mut layout = ParamLayout::new();
        let w = layout.push("w", 2, 3);
        let b = layout.push("b", 1, 3);
        let _unused = layout.push("unused", 1, 2);
        let params = ParamVector::from_vec(
            Arc::new(layout),
            vec![0.1, -0.3, 0.2, 0.4, 0.0, -0.1, 0.05, 0.0, 0.0, 7.0, 8.0],
        )
        .unwrap();
        (g, params, w, b)
    }

    #[test]
    fn backward_without_forward_fails() {
        let (g, params, _, _) = single_layer();
        let tape = Tape::new(&g, &params, true);
        assert!(matches!(tape.backward(), Err(Error::EmptyTape)));
    }

    #[test]
    fn linear_softmax_gradient_matches_textbook_identity() {
        let (g, params, w, b) = single_layer();
        let mut tape = Tape::new(&g, &params, true);
        tape.begin_branch();
        let z = tape.dense(g.graph.features(), w, b, false).unwrap();
        tape.end_branch(z.clone()).unwrap();
        tape.attach_loss(&NodeSelection::mean(vec![0], g.labels())).unwrap();
        let grad = tape.backward().unwrap();

        let row = z.row(0);
        let norm: f64 = row.iter().map(|v| v.exp()).sum();
        let x = g.graph.features().row(0);
        for j in 0..3 {
            let delta = row[j].exp() / norm - if j == 1 { 1.0 } else { 0.0 };
            for (k, &xk) in x.iter().enumerate() {
                let got = grad.as_slice()[k * 3 + j];
                assert!((got - delta * xk).abs() < 1e-15);
            }
            assert!((grad.as_slice()[6 + j] - delta).abs() < 1e-15);
        }
        // the block the loss never touches
        assert_eq!(&grad.as_slice()[9..], &[0.0, 0.0]);
    }

    #[test]
    fn backward_is_bit_deterministic() {
        let (g, params, w, b) = single_layer();
        let run = || {
            let mut tape = Tape::new(&g, &params, true);
            tape.begin_branch();
            let z = tape.dense(g.graph.features(), w, b, false).unwrap();
            tape.end_branch(z).unwrap();
            tape.attach_loss(&NodeSelection::mean(vec![0], g.labels())).unwrap();
            tape.backward().unwrap()
        };
        assert_eq!(run(), run());
    }
}
