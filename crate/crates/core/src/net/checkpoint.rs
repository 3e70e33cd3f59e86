//! Versioned JSON checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MeshUNet, NetworkConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope {
    version: u32,
    model: MeshUNet,
}

pub fn save_checkpoint(net: &MeshUNet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let env = Envelope {
        version: CHECKPOINT_VERSION,
        model: net.clone(),
    };
    let text = serde_json::to_string(&env).map_err(|e| Error::Checkpoint(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint; when `expected` is given the stored config must equal it.
pub fn load_checkpoint(
    path: impl AsRef<Path>,
    expected: Option<&NetworkConfig>,
) -> Result<MeshUNet> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let env: Envelope =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if env.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "version {} (expected {CHECKPOINT_VERSION})",
            env.version
        )));
    }
    env.model.config.validate()?;
    if let Some(cfg) = expected {
        if *cfg != env.model.config {
            return Err(Error::Checkpoint(
                "stored network config differs from the requested one".into(),
            ));
        }
    }
    Ok(env.model)
}
