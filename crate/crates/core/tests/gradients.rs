use gredit::diff::{finite_diff_gradient, NodeSelection};
use gredit::graph::{generate_sbm, PreparedGraph, SbmParams};
use gredit::models::{init_model, Architecture, BaseKind, GradScope, Mode, Model, ModelKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph() -> PreparedGraph<f64> {
    let g = generate_sbm(&SbmParams {
        num_blocks: 2,
        nodes_per_block: 10,
        p_in: 0.4,
        p_out: 0.05,
        feature_dim: 5,
        feature_noise: 1.0,
        seed: 3,
    })
    .unwrap();
    PreparedGraph::new(g)
}

/// Random parameters so no block (e.g. a zero-initialized peer output layer) hides a bug.
fn random_model(kind: ModelKind, seed: u64) -> Model<f64> {
    let arch = Architecture {
        hidden_dim: 6,
        ..Architecture::with_defaults(kind, 5, 2)
    };
    let template = init_model::<f64>(&arch, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..template.num_params()).map(|_| rng.random_range(-0.8..0.8)).collect();
    Model::from_parts(arch, data, seed).unwrap()
}

/// `|a − b| / max(|a|, |b|, 1e-3)`: relative where the gradient is visible,
/// absolute below the floor where central differences only resolve ~1e-10.
fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-3))
        .fold(0.0, f64::max)
}

fn check(kind: ModelKind) {
    let g = graph();
    let model = random_model(kind, 7);
    let sel = NodeSelection::mean((0..g.num_nodes()).collect(), g.labels());
    let (_, backward) = model.loss_and_grad(&g, &sel, Mode::Eval, GradScope::All).unwrap();
    let fd = finite_diff_gradient(
        |theta| {
            Model::from_parts(model.arch().clone(), theta.as_slice().to_vec(), 7)?.loss(&g, &sel, Mode::Eval)
        },
        model.params(),
        1e-6,
    )
    .unwrap();
    let err = max_rel_error(backward.as_slice(), fd.as_slice());
    println!("{kind}: max relative error {err:.3e}");
    assert!(err < 1e-5, "{kind}: {err}");
}

#[test]
fn mlp_backward_matches_finite_differences() {
    check(ModelKind::Mlp);
}

#[test]
fn gcn_backward_matches_finite_differences() {
    check(ModelKind::Gcn);
}

#[test]
fn sage_backward_matches_finite_differences() {
    check(ModelKind::Sage);
}

#[test]
fn egnn_backward_matches_finite_differences() {
    check(ModelKind::Egnn(BaseKind::Gcn));
    check(ModelKind::Egnn(BaseKind::Sage));
}

#[test]
fn training_mode_gradient_matches_fixed_mask_differences() {
    let g = graph();
    let model = random_model(ModelKind::Gcn, 9);
    let sel = NodeSelection::mean((0..g.num_nodes()).collect(), g.labels());
    let mode = Mode::Train { seed: 42 };
    let (_, backward) = model.loss_and_grad(&g, &sel, mode, GradScope::All).unwrap();
    let fd = finite_diff_gradient(
        |theta| Model::from_parts(model.arch().clone(), theta.as_slice().to_vec(), 9)?.loss(&g, &sel, mode),
        model.params(),
        1e-6,
    )
    .unwrap();
    assert!(max_rel_error(backward.as_slice(), fd.as_slice()) < 1e-5);
}

#[test]
fn editable_scope_keeps_only_peer_coordinates() {
    let g = graph();
    let model = random_model(ModelKind::Egnn(BaseKind::Sage), 1);
    let sel = NodeSelection::mean(vec![3], g.labels());
    let (_, all) = model.loss_and_grad(&g, &sel, Mode::Eval, GradScope::All).unwrap();
    let (_, editable) = model.loss_and_grad(&g, &sel, Mode::Eval, GradScope::Editable).unwrap();
    for (i, (&a, &e)) in all.as_slice().iter().zip(editable.as_slice()).enumerate() {
        if model.editable_mask()[i] {
            assert_eq!(a, e);
        } else {
            assert_eq!(e, 0.0);
        }
    }
}
