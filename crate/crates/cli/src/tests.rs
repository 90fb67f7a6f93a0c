use std::fs;
use std::path::Path;

use clap::Parser;

use crate::{exit_code, run, Cli};

const SMALL: &[&str] = &[
    "dataset.sbm.nodes_per_block=40",
    "dataset.sbm.feature_dim=16",
    "dataset.split.train_per_class=10",
    "dataset.split.valid_per_class=15",
    "editing.num_edits=4",
    "motivation.steps=5",
    "motivation.num_targets=3",
];

/// Exit code and error text of one in-process invocation.
struct Output {
    code: u8,
    message: String,
}

fn gredit(sub: &str, out: &Path, extra: &[&str]) -> Output {
    let out = out.display().to_string();
    let mut args = vec!["gredit", sub, "--out", &out];
    for s in SMALL {
        args.extend(["--set", s]);
    }
    args.extend(extra);
    match run(Cli::try_parse_from(args).unwrap()) {
        Ok(()) => Output {
            code: 0,
            message: String::new(),
        },
        Err(e) => Output {
            code: exit_code(&e),
            message: format!("{e:#}"),
        },
    }
}

fn ok(o: &Output) {
    assert_eq!(o.code, 0, "error: {}", o.message);
}

fn stderr(o: &Output) -> String {
    o.message.clone()
}

fn csv_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn missing_dataset_directory_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gredit("train", &tmp.path().join("t"), &["--set", "dataset.path=/nonexistent/graph"]);
    assert_eq!(o.code, (2));
    assert!(stderr(&o).contains("dataset.path"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_and_editors_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gredit("edit", &tmp.path().join("a"), &["--set", "editing.edtor=gd"]);
    assert_eq!(o.code, (2));
    assert!(stderr(&o).contains("edtor"));
    let o = gredit("edit", &tmp.path().join("b"), &["--set", "editing.editor=adam"]);
    assert_eq!(o.code, (2));
    assert!(stderr(&o).contains("editor"));
}

#[test]
fn dataset_missing_a_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&gredit("gen-sbm", &data, &[]));
    fs::remove_file(data.join("labels.csv")).unwrap();
    let path = format!("dataset.path={}", data.display());
    let o = gredit("train", &tmp.path().join("t"), &["--set", &path]);
    assert_eq!(o.code, (3), "{}", stderr(&o));
}

#[test]
fn repeated_training_writes_identical_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&gredit("train", &a, &[]));
    ok(&gredit("train", &b, &[]));
    for name in ["model.json", "params.f64", "splits.json", "train_curve.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(csv_lines(&a.join("train_curve.csv")).len(), 201);
}

#[test]
fn refuses_to_overwrite_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    ok(&gredit("train", &out, &[]));
    let o = gredit("train", &out, &[]);
    assert_eq!(o.code, (2));
    assert!(stderr(&o).contains("--force"));
    ok(&gredit("train", &out, &["--force"]));
}

#[test]
fn gd_edit_needs_no_anchors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gd");
    ok(&gredit("edit", &out, &["--set", "editing.editor=gd"]));
    assert!(!out.join("anchors.json").exists());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["editor"], "gd");
    assert_eq!(report["records"].as_array().unwrap().len(), 4);
    assert_eq!(
        csv_lines(&out.join("summary.csv"))[0],
        "editor,target,success,steps,acc_before,acc_after,dd"
    );
}

#[test]
fn gre_plus_pipeline_through_saved_anchors() {
    let tmp = tempfile::tempdir().unwrap();
    let (ckpt, anchors, edit) = (tmp.path().join("ckpt"), tmp.path().join("anc"), tmp.path().join("edit"));
    ok(&gredit("train", &ckpt, &[]));
    let ckpt_arg = ckpt.display().to_string();
    ok(&gredit("capture-anchors", &anchors, &["--checkpoint", &ckpt_arg, "--set", "editing.k=3"]));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(anchors.join("anchors.json")).unwrap()).unwrap();
    assert_eq!(meta["subsets"].as_array().unwrap().len(), 3);
    let anchors_arg = anchors.display().to_string();
    ok(&gredit(
        "edit",
        &edit,
        &["--checkpoint", &ckpt_arg, "--anchors", &anchors_arg, "--set", "editing.k=3"],
    ));
    assert!(edit.join("report.json").exists());
    assert!(edit.join("curves.csv").exists());
}

#[test]
fn anchors_from_another_model_are_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&gredit("train", &a, &[]));
    ok(&gredit("train", &b, &["--set", "training.seed=9"]));
    let anchors = tmp.path().join("anc");
    ok(&gredit("capture-anchors", &anchors, &["--checkpoint", &a.display().to_string()]));
    let o = gredit(
        "edit",
        &tmp.path().join("e"),
        &["--checkpoint", &b.display().to_string(), "--anchors", &anchors.display().to_string()],
    );
    assert_eq!(o.code, (3), "{}", stderr(&o));
    assert!(stderr(&o).contains("fingerprint"));
}

#[test]
fn motivation_writes_three_metrics_per_architecture() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    ok(&gredit("motivation", &out, &[]));
    let lines = csv_lines(&out.join("curves.csv"));
    assert_eq!(lines[0], "step,metric,value,arch");
    let mut groups: Vec<(String, String)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[3].to_owned(), f[1].to_owned())
        })
        .collect();
    groups.sort();
    groups.dedup();
    assert_eq!(groups.len(), 9);
    assert_eq!(lines.len() - 1, 9 * 6);
}

#[test]
fn sweep_row_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    ok(&gredit(
        "sweep",
        &out,
        &["--set", "sweep.lambda_grid=[0, 1]", "--set", "sweep.k_grid=[1, 2, 3]"],
    ));
    assert_eq!(csv_lines(&out.join("pareto.csv")).len(), 1 + 6);
    let out = tmp.path().join("s_gd");
    ok(&gredit(
        "sweep",
        &out,
        &["--set", "editing.editor=gd", "--set", "sweep.lambda_grid=[0, 1]", "--set", "sweep.k_grid=[1, 2, 3]"],
    ));
    assert_eq!(csv_lines(&out.join("pareto.csv")).len(), 1 + 2);
}
