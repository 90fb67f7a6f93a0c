//! `model.json` + `params.f64` checkpoint format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, Model};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    architecture: Architecture,
    seed: u64,
    num_params: usize,
    fingerprint: String,
}

/// Writes `model.json` and `params.f64` (raw little-endian `f64`, layout order).
pub fn save_checkpoint<T: Scalar>(dir: impl AsRef<Path>, model: &Model<T>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = ModelFile {
        architecture: model.arch().clone(),
        seed: model.seed(),
        num_params: model.num_params(),
        fingerprint: model.fingerprint(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::json(dir, e))?;
    let json_path = dir.join("model.json");
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    let bytes: Vec<u8> = model
        .params()
        .as_slice()
        .iter()
        .flat_map(|p| p.as_f64().to_le_bytes())
        .collect();
    let bin_path = dir.join("params.f64");
    fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))
}

pub fn load_checkpoint<T: Scalar>(dir: impl AsRef<Path>) -> Result<Model<T>> {
    let dir = dir.as_ref();
    let json_path = dir.join("model.json");
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let meta: ModelFile = serde_json::from_str(&text).map_err(|e| Error::json(&json_path, e))?;
    let bin_path = dir.join("params.f64");
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    if bytes.len() != meta.num_params * 8 {
        return Err(Error::Parse {
            path: bin_path,
            line: 0,
            msg: format!("expected {} bytes, found {}", meta.num_params * 8, bytes.len()),
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    let model = Model::from_parts(meta.architecture, data, meta.seed)?;
    Ok(model)
}
