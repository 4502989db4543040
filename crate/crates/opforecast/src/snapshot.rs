//! Versioned JSON snapshots of a trained model.

use std::fs;
use std::path::Path;

use opforecast_core::iohmm::IoHmmModel;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const FORMAT: &str = "opforecast-model";
pub const VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a> {
    format: &'a str,
    version: u32,
    model: &'a IoHmmModel,
}

#[derive(Deserialize)]
struct OwnedEnvelope {
    format: String,
    version: u32,
    model: IoHmmModel,
}

pub fn to_string(model: &IoHmmModel) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { format: FORMAT, version: VERSION, model })?;
    s.push('\n');
    Ok(s)
}

/// Parses and structurally validates a snapshot.
pub fn from_str(text: &str) -> Result<IoHmmModel> {
    let env: OwnedEnvelope = serde_json::from_str(text).map_err(|e| AppError::Snapshot(e.to_string()))?;
    if env.format != FORMAT {
        return Err(AppError::Snapshot(format!("unexpected format `{}`", env.format)));
    }
    if env.version != VERSION {
        return Err(AppError::Snapshot(format!("unsupported version {}", env.version)));
    }
    env.model.validate().map_err(|e| AppError::Snapshot(e.to_string()))?;
    Ok(env.model)
}

pub fn save(model: &IoHmmModel, path: &Path) -> Result<()> {
    fs::write(path, to_string(model)?).map_err(|e| AppError::io(path, e))
}

pub fn load(path: &Path) -> Result<IoHmmModel> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    from_str(&text)
}
