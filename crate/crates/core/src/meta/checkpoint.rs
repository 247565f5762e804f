//! Checkpoint files.
//!
//! A checkpoint is one JSON object:
//!
//! ```text
//! { "format": "fenlo-checkpoint", "version": 1, "learner": { "MetaFlo": { .. } } }
//! ```
//!
//! `learner` is either `MetaFlo` or `Fomaml` and holds the full training state:
//! configuration, every named parameter tensor (`shape` plus row-major `data`),
//! both Adam states with their moments, and the step counter. Floats are
//! written with round-trip precision, so a reloaded state continues bit-for-bit.
//! Readers reject any other `format` and any `version` they do not know.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::fomaml::FomamlState;
use crate::meta::learner::MetaTrainState;

pub const CHECKPOINT_FORMAT: &str = "fenlo-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Learner {
    MetaFlo(MetaTrainState),
    Fomaml(FomamlState),
}

#[derive(Serialize, Deserialize)]
struct Envelope<L> {
    format: String,
    version: u32,
    learner: L,
}

pub fn save_checkpoint(path: &Path, learner: &Learner) -> Result<()> {
    let env = Envelope {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        learner,
    };
    let text = serde_json::to_string(&env).map_err(|e| Error::Checkpoint(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<Learner> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let header: Envelope<serde::de::IgnoredAny> = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!("unknown format {:?}", header.format)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", header.version)));
    }
    let env: Envelope<Learner> = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    Ok(env.learner)
}
