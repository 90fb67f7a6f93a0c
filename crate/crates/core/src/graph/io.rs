//! Directory-based graph format: `meta.json`, `edges.csv`, `features.csv`,
//! `labels.csv` and an optional `splits.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Graph, SplitAssignment};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    num_nodes: usize,
    num_classes: usize,
    feature_dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitsFile {
    train: Vec<usize>,
    valid: Vec<usize>,
    test: Vec<usize>,
    #[serde(default)]
    seed: u64,
}

fn read_records<F: FromStr>(path: &Path, width: Option<usize>) -> Result<Vec<Vec<F>>>
where
    F::Err: std::fmt::Display,
{
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if let Some(w) = width {
            if record.len() != w {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    msg: format!("expected {w} columns, found {}", record.len()),
                });
            }
        }
        let row = record
            .iter()
            .map(|field| {
                field.parse::<F>().map_err(|e| Error::Parse {
                    path: path.into(),
                    line,
                    msg: format!("cannot parse {field:?}: {e}"),
                })
            })
            .collect::<Result<Vec<F>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.into(),
            line,
            msg: format!("{other:?}"),
        },
    }
}

fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Reads a graph directory and validates it.
pub fn load_graph<T: Scalar>(dir: impl AsRef<Path>) -> Result<Graph<T>> {
    let dir = dir.as_ref();
    let meta: Meta = read_json(&dir.join("meta.json"))?;

    let edges_path = dir.join("edges.csv");
    let edges = read_records::<usize>(&edges_path, Some(2))?
        .into_iter()
        .map(|r| (r[0], r[1]))
        .collect::<Vec<_>>();

    let feat_path = dir.join("features.csv");
    let rows = read_records::<f64>(&feat_path, Some(meta.feature_dim))?;
    if rows.len() != meta.num_nodes {
        return Err(Error::InvalidGraph(format!(
            "{}: {} feature rows for {} nodes",
            feat_path.display(),
            rows.len(),
            meta.num_nodes
        )));
    }
    let data = rows.into_iter().flatten().map(T::lit).collect();
    let features = Matrix::from_vec(meta.num_nodes, meta.feature_dim, data)?;

    let labels_path = dir.join("labels.csv");
    let labels: Vec<usize> = read_records::<usize>(&labels_path, Some(1))?
        .into_iter()
        .map(|r| r[0])
        .collect();

    Graph::new(meta.num_nodes, edges, features, labels, meta.num_classes)
}

/// Writes `graph` in the directory format. Floats use the shortest
/// round-trip decimal form, so a reload is bit-exact.
pub fn save_graph<T: Scalar>(dir: impl AsRef<Path>, graph: &Graph<T>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = Meta {
        num_nodes: graph.num_nodes(),
        num_classes: graph.num_classes(),
        feature_dim: graph.feature_dim(),
    };
    let meta_text = serde_json::to_string(&meta).map_err(|e| Error::json(dir, e))?;
    write_text(dir.join("meta.json"), &meta_text)?;

    let mut edges = String::new();
    for (u, v) in graph.edges() {
        edges.push_str(&format!("{u},{v}\n"));
    }
    write_text(dir.join("edges.csv"), &edges)?;

    let mut feats = String::new();
    for i in 0..graph.num_nodes() {
        let row: Vec<String> = graph
            .features()
            .row(i)
            .iter()
            .map(|x| format!("{:?}", x.as_f64()))
            .collect();
        feats.push_str(&row.join(","));
        feats.push('\n');
    }
    write_text(dir.join("features.csv"), &feats)?;

    let labels: String = graph.labels().iter().map(|y| format!("{y}\n")).collect();
    write_text(dir.join("labels.csv"), &labels)
}

/// Reads `splits.json` if present.
pub fn load_splits(dir: impl AsRef<Path>, num_nodes: usize) -> Result<Option<SplitAssignment>> {
    let path = dir.as_ref().join("splits.json");
    if !path.exists() {
        return Ok(None);
    }
    let s: SplitsFile = read_json(&path)?;
    SplitAssignment::from_indices(num_nodes, &s.train, &s.valid, &s.test, s.seed).map(Some)
}

pub fn save_splits(dir: impl AsRef<Path>, split: &SplitAssignment) -> Result<()> {
    let dir = dir.as_ref();
    let file = SplitsFile {
        train: split.train_nodes(),
        valid: split.valid_nodes(),
        test: split.test_nodes(),
        seed: split.seed,
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::json(dir, e))?;
    write_text(dir.join("splits.json"), &text)
}
