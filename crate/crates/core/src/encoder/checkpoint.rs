//! `model.json` + `weights.bin` checkpoints.
//!
//! `weights.bin` holds every parameter tensor as little-endian `f64`,
//! concatenated in declaration order; `model.json` carries the layout table
//! alongside the configuration.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{init_params, EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::graphdata::ClassMapping;

const MODEL: &str = "model.json";
const WEIGHTS: &str = "weights.bin";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorLayout {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in `f64` values from the start of `weights.bin`.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: EncoderConfig,
    pub in_dim: usize,
    pub seed: u64,
    pub class_remap: Option<Vec<ClassMapping>>,
    /// Free-form settings echoed next to the model (for example the
    /// training configuration).
    pub settings: serde_json::Value,
    pub params: EncoderParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    config: EncoderConfig,
    in_dim: usize,
    seed: u64,
    class_remap: Option<Vec<ClassMapping>>,
    settings: serde_json::Value,
    layout: Vec<TensorLayout>,
}

pub fn save_checkpoint(ckpt: &Checkpoint, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut layout = Vec::new();
    let mut bytes = Vec::new();
    let mut offset = 0;
    ckpt.params.visit(|name, _, shape, data| {
        layout.push(TensorLayout { name, shape, offset });
        offset += data.len();
        for v in data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    });
    let model = ModelFile {
        config: ckpt.config.clone(),
        in_dim: ckpt.in_dim,
        seed: ckpt.seed,
        class_remap: ckpt.class_remap.clone(),
        settings: ckpt.settings.clone(),
        layout,
    };
    crate::graphdata::write_json(&dir.join(MODEL), &model)?;
    let path = dir.join(WEIGHTS);
    fs::write(&path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let model_path = dir.join(MODEL);
    let model: ModelFile = crate::graphdata::read_json(&model_path)?;
    model
        .config
        .validate()
        .map_err(|e| Error::format(&model_path, e.to_string()))?;
    let weights_path = dir.join(WEIGHTS);
    let raw = fs::read(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
    if raw.len() % 8 != 0 {
        return Err(Error::format(&weights_path, "length is not a multiple of 8"));
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();

    let mut params = init_params(&model.config, model.in_dim, 0)
        .map_err(|e| Error::format(&model_path, e.to_string()))?;
    let mut expected = Vec::new();
    let mut offset = 0;
    params.visit(|name, _, shape, data| {
        expected.push(TensorLayout { name, shape, offset });
        offset += data.len();
    });
    if expected != model.layout {
        return Err(Error::format(&model_path, "layout table does not match the configuration"));
    }
    if offset != values.len() {
        return Err(Error::format(
            &weights_path,
            format!("expected {offset} values, found {}", values.len()),
        ));
    }
    let mut pos = 0;
    params.visit_mut(|_, _, data| {
        data.copy_from_slice(&values[pos..pos + data.len()]);
        pos += data.len();
    });
    if !params.is_finite() {
        return Err(Error::format(&weights_path, "contains non-finite values"));
    }
    Ok(Checkpoint {
        config: model.config,
        in_dim: model.in_dim,
        seed: model.seed,
        class_remap: model.class_remap,
        settings: model.settings,
        params,
    })
}
