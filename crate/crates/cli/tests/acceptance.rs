//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any fail.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use gredit::diff::{finite_diff_gradient, NodeSelection};
use gredit::graph::{generate_sbm, split_stratified, PreparedGraph, SbmParams};
use gredit::harness::{
    edit_once, misclassified, run_motivation, run_protocol, EditConfig, EditContext, EditRequest, EditorKind,
    MotivationConfig, ProtocolConfig, ProtocolKind, RunReport,
};
use gredit::models::{
    init_model, stitch_egnn, train_base, Architecture, BaseKind, GradScope, Mode, Model, ModelKind, TrainConfig,
};
use gredit::rewire::{gre_plus_rewire, gre_rewire};
use gredit::{GradientVector64, Model64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = Result<String, String>;

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let criteria: [(&str, fn() -> Check); 8] = [
        ("gradient correctness", gradients),
        ("GRE closed form", gre_closed_form),
        ("GRE+ vs projection oracle", gre_plus_oracle),
        ("desk-scale end-to-end", desk_scale),
        ("motivation curves", motivation),
        ("sequential cumulative drawdown", sequential),
        ("EGNN stitching", egnn_stitching),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {}: {name} ({:.1}s): {detail}",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- 1

fn gradients() -> Check {
    let start = Instant::now();
    let graph = PreparedGraph::new(
        generate_sbm::<f64>(&SbmParams {
            num_blocks: 2,
            nodes_per_block: 10,
            p_in: 0.4,
            p_out: 0.05,
            feature_dim: 6,
            feature_noise: 1.0,
            seed: 1,
        })
        .map_err(|e| e.to_string())?,
    );
    let sel = NodeSelection::mean((0..graph.num_nodes()).collect(), graph.labels());
    let kinds = [
        ModelKind::Mlp,
        ModelKind::Gcn,
        ModelKind::Sage,
        ModelKind::Egnn(BaseKind::Gcn),
        ModelKind::Egnn(BaseKind::Sage),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for kind in kinds {
        let arch = Architecture {
            hidden_dim: 8,
            ..Architecture::with_defaults(kind, 6, 2)
        };
        let n = init_model::<f64>(&arch, 0).map_err(|e| e.to_string())?.num_params();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data = (0..n).map(|_| rng.random_range(-0.8..0.8)).collect();
        let model = Model::from_parts(arch.clone(), data, 3).map_err(|e| e.to_string())?;
        let (_, backward) = model
            .loss_and_grad(&graph, &sel, Mode::Eval, GradScope::All)
            .map_err(|e| e.to_string())?;
        let fd = finite_diff_gradient(
            |theta| Model::from_parts(arch.clone(), theta.as_slice().to_vec(), 3)?.loss(&graph, &sel, Mode::Eval),
            model.params(),
            1e-6,
        )
        .map_err(|e| e.to_string())?;
        // Relative error with a 1e-3 magnitude floor: central differences
        // cannot resolve entries far below the O(ε²) truncation error.
        let err = backward
            .as_slice()
            .iter()
            .zip(fd.as_slice())
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-3))
            .fold(0.0, f64::max);
        worst = worst.max(err);
        parts.push(format!("{kind} {err:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst < 1e-5 && secs < 30.0,
        format!("max rel error {} (< 1e-5), {secs:.2}s (< 30s)", parts.join(", ")),
    )
}

// ---------------------------------------------------------------- 2

fn half_space_oracle(g_tg: &[f64], g_train: &[f64], lambda: f64) -> Vec<f64> {
    let norm = dot(g_train, g_train).sqrt();
    let u: Vec<f64> = g_train.iter().map(|x| x / norm).collect();
    let c: Vec<f64> = g_tg.iter().map(|x| x / (1.0 + lambda)).collect();
    let s = dot(&u, &c);
    if s >= 0.0 {
        c
    } else {
        c.iter().zip(&u).map(|(ci, ui)| ci - s * ui).collect()
    }
}

fn gre_closed_form() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_violation, mut worst_diff, mut scaling_ok, mut projected) = (0.0f64, 0.0f64, true, 0);
    for i in 0..1000 {
        let g_tg = gaussian(&mut rng, 64);
        let g_train: Vec<f64> = gaussian(&mut rng, 64).iter().map(|x| x * rng.random_range(0.1..10.0)).collect();
        let lambda = if i % 10 == 0 { 0.0 } else { rng.random_range(0.0..50.0) };
        let anchor = GradientVector64::from_flat(g_train.clone());
        let target = GradientVector64::from_flat(g_tg.clone());
        let out = gre_rewire(&target, &anchor, lambda).map_err(|e| e.to_string())?;
        let zero = gre_rewire(&target, &anchor, 0.0).map_err(|e| e.to_string())?;
        let g = out.gradient.as_slice();
        if out.dual[0] > 0.0 {
            projected += 1;
        }
        let bound = 1e-10 * dot(&g_train, &g_train).sqrt() * dot(g, g).sqrt();
        worst_violation = worst_violation.max((-dot(&g_train, g) - bound).max(0.0));
        worst_diff = worst_diff.max(max_abs_diff(g, &half_space_oracle(&g_tg, &g_train, lambda)));
        scaling_ok &= g
            .iter()
            .zip(zero.gradient.as_slice())
            .all(|(&a, &b)| a == b / (1.0 + lambda));
    }
    verdict(
        worst_violation == 0.0 && worst_diff <= 1e-10 && scaling_ok,
        format!(
            "1000 draws ({projected} projected), constraint violations {worst_violation:.1e}, \
             oracle diff {worst_diff:.1e} (<= 1e-10), lambda scaling exact: {scaling_ok}"
        ),
    )
}

// ---------------------------------------------------------------- 3

/// Dykstra's alternating projections onto the half-spaces `{g : a_kᵀg ≥ 0}`.
fn dykstra(c: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
    let mut x = c.to_vec();
    let mut incr = vec![vec![0.0; c.len()]; rows.len()];
    for _ in 0..1_000_000 {
        let prev = x.clone();
        for (a, p) in rows.iter().zip(incr.iter_mut()) {
            let y: Vec<f64> = x.iter().zip(p.iter()).map(|(xi, pi)| xi + pi).collect();
            let s = dot(a, &y);
            let proj: Vec<f64> = if s < 0.0 {
                let na = dot(a, a);
                y.iter().zip(a).map(|(yi, ai)| yi - s / na * ai).collect()
            } else {
                y.clone()
            };
            for ((pi, yi), qi) in p.iter_mut().zip(&y).zip(&proj) {
                *pi = yi - qi;
            }
            x = proj;
        }
        if max_abs_diff(&x, &prev) < 1e-15 {
            break;
        }
    }
    x
}

fn gre_plus_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_diff, mut worst_kkt, mut worst_k1) = (0.0f64, 0.0f64, 0.0f64);
    for k in [1usize, 2, 3, 5] {
        for _ in 0..200 {
            let g_tg = gaussian(&mut rng, 10);
            let rows: Vec<Vec<f64>> = (0..k).map(|_| gaussian(&mut rng, 10)).collect();
            let lambda = rng.random_range(0.0..10.0);
            let anchors: Vec<GradientVector64> = rows.iter().map(|r| GradientVector64::from_flat(r.clone())).collect();
            let refs: Vec<&GradientVector64> = anchors.iter().collect();
            let target = GradientVector64::from_flat(g_tg.clone());
            let out = gre_plus_rewire(&target, &refs, lambda, 1e-10).map_err(|e| e.to_string())?;
            let c: Vec<f64> = g_tg.iter().map(|x| x / (1.0 + lambda)).collect();
            worst_diff = worst_diff.max(max_abs_diff(out.gradient.as_slice(), &dykstra(&c, &rows)));
            worst_kkt = worst_kkt.max(out.kkt.map_or(0.0, |r| r.residual));
            if k == 1 {
                let gre = gre_rewire(&target, &anchors[0], lambda).map_err(|e| e.to_string())?;
                worst_k1 = worst_k1.max(max_abs_diff(out.gradient.as_slice(), gre.gradient.as_slice()));
            }
        }
    }
    verdict(
        worst_diff <= 1e-6 && worst_kkt <= 1e-8 && worst_k1 <= 1e-12,
        format!(
            "800 instances, oracle diff {worst_diff:.1e} (<= 1e-6), KKT residual {worst_kkt:.1e} (<= 1e-8), \
             K=1 vs GRE {worst_k1:.1e} (<= 1e-12)"
        ),
    )
}

// ---------------------------------------------------------------- desk SBM

fn desk_context() -> EditContext<f64> {
    let graph = generate_sbm(&SbmParams::default()).expect("default SBM");
    let split = split_stratified(graph.labels(), graph.num_classes(), 20, 30, 0).expect("split");
    EditContext::new(graph, split).expect("context")
}

fn desk_model(ctx: &EditContext<f64>, kind: ModelKind) -> Model64 {
    let g = &ctx.full.graph;
    let arch = Architecture::with_defaults(kind, g.feature_dim(), g.num_classes());
    let init = init_model(&arch, 0).expect("init");
    train_base(&init, &ctx.train, &TrainConfig::default()).expect("train").model
}

fn editor(kind: EditorKind) -> EditConfig {
    EditConfig {
        editor: kind,
        ..EditConfig::default()
    }
}

fn independent(seed: u64) -> ProtocolConfig {
    ProtocolConfig {
        kind: ProtocolKind::Independent,
        num_edits: 50,
        seed,
        ..ProtocolConfig::default()
    }
}

fn protocol(model: &Model64, ctx: &EditContext<f64>, config: &EditConfig, p: &ProtocolConfig) -> Result<RunReport, String> {
    run_protocol(model, ctx, config, None, p).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- 4

fn desk_scale() -> Check {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| {
        let start = Instant::now();
        let ctx = desk_context();
        let model = desk_model(&ctx, ModelKind::Gcn);
        let (mut min_sr, mut wins) = (f64::INFINITY, 0);
        let mut means = [0.0f64; 3];
        for seed in 0..10 {
            let mut dd = [0.0f64; 3];
            for (j, kind) in EditorKind::ALL.into_iter().enumerate() {
                let report = protocol(&model, &ctx, &editor(kind), &independent(seed))?;
                min_sr = min_sr.min(report.success_rate);
                dd[j] = report.dd.mean;
                means[j] += report.dd.mean / 10.0;
            }
            if dd[2] <= dd[0] {
                wins += 1;
            }
        }
        let secs = start.elapsed().as_secs_f64();
        verdict(
            min_sr >= 0.9 && wins >= 8 && secs < 300.0,
            format!(
                "min SR {min_sr:.2} (>= 0.9), DD(GRE+) <= DD(GD) in {wins}/10 seeds (>= 8), \
                 mean DD gd {:.3} gre {:.3} gre+ {:.3}, {secs:.0}s single-threaded (< 300s)",
                means[0], means[1], means[2]
            ),
        )
    })
}

// ---------------------------------------------------------------- 5

fn motivation() -> Check {
    let ctx = desk_context();
    let kinds = [ModelKind::Mlp, ModelKind::Gcn, ModelKind::Sage];
    let models: Vec<(String, Model64)> = kinds.iter().map(|&k| (k.to_string(), desk_model(&ctx, k))).collect();
    let refs: Vec<(String, &Model64)> = models.iter().map(|(n, m)| (n.clone(), m)).collect();
    let curves = run_motivation(&refs, &ctx, &MotivationConfig::default()).map_err(|e| e.to_string())?;
    let groups: BTreeSet<(String, String)> = curves
        .iter()
        .flat_map(|c| c.rows())
        .map(|r| (r.arch, r.metric))
        .collect();
    let gcn = curves.iter().find(|c| c.arch == "gcn").ok_or("no gcn curve")?;
    let last = gcn.train_loss.len() - 1;
    let (tr0, tr1, tg0, tg1) = (gcn.train_loss[0], gcn.train_loss[last], gcn.target_loss[0], gcn.target_loss[last]);
    verdict(
        tr1 > tr0 && tg1 < tg0 && groups.len() == 9,
        format!(
            "gcn train loss {tr0:.3} -> {tr1:.3}, target loss {tg0:.3} -> {tg1:.3}, {} arch x metric groups",
            groups.len()
        ),
    )
}

// ---------------------------------------------------------------- 6

fn sequential() -> Check {
    let ctx = desk_context();
    let model = desk_model(&ctx, ModelKind::Gcn);
    let gre = editor(EditorKind::Gre);
    let ind = protocol(&model, &ctx, &gre, &independent(0))?;
    let seq_config = ProtocolConfig {
        kind: ProtocolKind::Sequential,
        ..independent(0)
    };
    let seq = protocol(&model, &ctx, &gre, &seq_config)?;
    let curve = seq.cumulative_dd.clone().unwrap_or_default();
    let cumulative = curve.last().copied().unwrap_or(f64::NAN);
    let pool = misclassified(&model, &ctx).map_err(|e| e.to_string())?.len();
    verdict(
        seq.records.len() == 50 && cumulative >= ind.dd.mean,
        format!(
            "cumulative DD {cumulative:.2} after {} sequential edits vs independent mean DD {:.2}; \
             target pool {pool} misclassified validation nodes; notes: {:?}",
            seq.records.len(),
            ind.dd.mean,
            seq.notes
        ),
    )
}

// ---------------------------------------------------------------- 7

fn egnn_stitching() -> Check {
    let ctx = desk_context();
    let base = desk_model(&ctx, ModelKind::Gcn);
    let egnn = stitch_egnn(&base).map_err(|e| e.to_string())?;
    let before = base.logits(&ctx.full).map_err(|e| e.to_string())?;
    let after = egnn.logits(&ctx.full).map_err(|e| e.to_string())?;
    let identical = before == after;

    let targets = misclassified(&egnn, &ctx).map_err(|e| e.to_string())?;
    let config = editor(EditorKind::GrePlus);
    let anchors = ctx.capture_anchors(&egnn, config.effective_k(), 0).map_err(|e| e.to_string())?;
    let mask = egnn.editable_mask();
    let (mut changed, mut outside, mut successes) = (0usize, 0usize, 0usize);
    for &t in targets.iter().take(10) {
        let label = ctx.full.labels()[t];
        let (edited, outcome) = edit_once(&egnn, &ctx, &config, Some(&anchors), &EditRequest::single(t, label, &config))
            .map_err(|e| e.to_string())?;
        successes += outcome.success as usize;
        for (i, (a, b)) in egnn.params().as_slice().iter().zip(edited.params().as_slice()).enumerate() {
            if a != b {
                changed += 1;
                outside += !mask[i] as usize;
            }
        }
    }
    verdict(
        identical && changed > 0 && outside == 0,
        format!(
            "stitched logits bit-identical: {identical}; {} GRE+ edits ({successes} succeeded) changed {changed} \
             coordinates, {outside} outside the editable mask",
            targets.len().min(10)
        ),
    )
}

// ---------------------------------------------------------------- 8

fn files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [(&str, &[&str]); 4] = [
        ("train", &[]),
        ("edit", &[]),
        ("sweep", &["--set", "sweep.lambda_grid=[0, 1]", "--set", "sweep.k_grid=[1, 3]", "--set", "editing.num_edits=10"]),
        ("motivation", &["--set", "motivation.num_targets=10", "--set", "motivation.steps=20"]),
    ];
    let mut compared = 0;
    for (cmd, extra) in runs {
        let out = tmp.path().join(cmd);
        let moved = tmp.path().join(format!("{cmd}-first"));
        for round in 0..2 {
            let status = Command::new(env!("CARGO_BIN_EXE_gredit"))
                .arg(cmd)
                .arg("--out")
                .arg(&out)
                .args(extra)
                .env("GRE_NUM_THREADS", "4")
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
            if round == 0 {
                fs::rename(&out, &moved).map_err(|e| e.to_string())?;
            }
        }
        let (a, b) = (files(&moved), files(&out));
        if a != b {
            return Err(format!("{cmd}: file sets differ: {a:?} vs {b:?}"));
        }
        for f in &a {
            if fs::read(moved.join(f)).ok() != fs::read(out.join(f)).ok() {
                return Err(format!("{cmd}: {} differs between reruns", f.display()));
            }
            compared += 1;
        }
    }
    Ok(format!("train, edit, sweep and motivation reruns: {compared} files byte-identical"))
}
