//! Versioned JSON model files.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::model::{GraphContext, Model, ModelSpec};
use super::params::ParamClass;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::seeded;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamRecord {
    name: String,
    class: ParamClass,
    rows: usize,
    cols: usize,
    /// Little-endian `f64` values in row-major order, base64 encoded.
    data: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    architecture: ModelSpec,
    shift_hash: String,
    params: Vec<ParamRecord>,
}

pub fn model_to_json(model: &Model) -> Result<String> {
    let params = model
        .params()
        .iter()
        .map(|p| ParamRecord {
            name: p.name.clone(),
            class: p.class,
            rows: p.value.rows(),
            cols: p.value.cols(),
            data: STANDARD.encode(
                p.value
                    .as_slice()
                    .iter()
                    .flat_map(|v| v.to_le_bytes())
                    .collect::<Vec<u8>>(),
            ),
        })
        .collect();
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        architecture: model.spec().clone(),
        shift_hash: model.shift_hash().to_string(),
        params,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Rebuilds a model for `ctx`. The document's shift hash must match `ctx`.
pub fn model_from_json(text: &str, ctx: &GraphContext) -> Result<Model> {
    let raw: serde_json::Value = serde_json::from_str(text)?;
    let found = raw
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Config("model file lacks format_version".into()))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(Error::FormatVersion {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(raw)?;
    if file.shift_hash != ctx.hash() {
        return Err(Error::InvalidArgument(format!(
            "model was trained on shift {} but the graph hashes to {}",
            file.shift_hash,
            ctx.hash()
        )));
    }
    let mut model = Model::new(file.architecture, ctx, &mut seeded(0))?;
    if file.params.len() != model.params().len() {
        return Err(Error::ShapeMismatch(format!(
            "{} stored parameters, architecture has {}",
            file.params.len(),
            model.params().len()
        )));
    }
    for (idx, rec) in file.params.into_iter().enumerate() {
        let expected = model.params().get(idx);
        if rec.name != expected.name
            || rec.class != expected.class
            || (rec.rows, rec.cols) != expected.value.shape()
        {
            return Err(Error::ShapeMismatch(format!(
                "parameter {idx} is {} {}x{}, architecture expects {} {:?}",
                rec.name,
                rec.rows,
                rec.cols,
                expected.name,
                expected.value.shape()
            )));
        }
        let bytes = STANDARD
            .decode(rec.data.as_bytes())
            .map_err(|e| Error::Config(format!("parameter {}: {e}", rec.name)))?;
        if bytes.len() != rec.rows * rec.cols * 8 {
            return Err(Error::ShapeMismatch(format!(
                "parameter {} holds {} bytes",
                rec.name,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        *model.params_mut().value_mut(idx) = DenseMatrix::from_vec(rec.rows, rec.cols, values)?;
    }
    Ok(model)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path, ctx: &GraphContext) -> Result<Model> {
    model_from_json(&std::fs::read_to_string(path)?, ctx)
}
