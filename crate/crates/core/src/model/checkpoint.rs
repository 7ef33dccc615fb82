//! Checkpoint file format, version 1: one JSON object
//!
//! ```json
//! {"format": "eventarg-checkpoint", "version": 1,
//!  "architecture": {...}, "vocabulary": ["<unk>", ...], "parameters": [...]}
//! ```
//!
//! `parameters` is the flat parameter vector in layout order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::network::{Architecture, ExtractorModel};
use super::vocab::Vocabulary;

pub const CHECKPOINT_FORMAT: &str = "eventarg-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    architecture: Architecture,
    vocabulary: Vocabulary,
    parameters: Vec<f64>,
}

pub fn to_json(model: &ExtractorModel) -> String {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        architecture: model.arch,
        vocabulary: model.vocab.clone(),
        parameters: model.params.clone(),
    };
    serde_json::to_string(&file).expect("checkpoint serializes")
}

pub fn from_json(text: &str) -> Result<ExtractorModel> {
    let file: CheckpointFile = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!("unknown format {:?}", file.format)));
    }
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", file.version)));
    }
    let n = file.parameters.len();
    ExtractorModel::from_parts(file.architecture, file.vocabulary, file.parameters)
        .ok_or_else(|| Error::Checkpoint(format!("{n} parameters or vocabulary do not match the architecture")))
}

pub fn save(model: &ExtractorModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<ExtractorModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
