//! Checkpoint files: a magic line followed by JSON. Floats are written with
//! round-trip precision so a loaded state is bit-identical to the saved one.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::TrainState;
use crate::error::{Error, Result};

const MAGIC: &str = "HMRG1";
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub state: TrainState,
}

impl Checkpoint {
    pub fn new(config: &ExperimentConfig, state: &TrainState) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: config.clone(),
            state: state.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let body = serde_json::to_string(self).expect("checkpoint serializes");
        format!("{MAGIC}\n{body}\n")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (magic, body) = text.split_once('\n').unwrap_or((text, ""));
        if magic.trim_end_matches('\r') != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic line)".into()));
        }
        let ckpt: Checkpoint = serde_json::from_str(body)
            .map_err(|e| Error::Format(format!("corrupt checkpoint: {e}")))?;
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {}",
                ckpt.format_version
            )));
        }
        ckpt.config.validate()?;
        Ok(ckpt)
    }
}

pub fn save_checkpoint(path: &Path, config: &ExperimentConfig, state: &TrainState) -> Result<()> {
    fs::write(path, Checkpoint::new(config, state).to_text()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_text(&text)
}
