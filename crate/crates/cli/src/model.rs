//! Checkpoint plus the scene setup it was trained under.

use std::path::{Path, PathBuf};

use liveview_core::net::Network;
use liveview_core::train::TrainConfig;

use crate::error::{usage, CliError, Result};

pub const SETUP_FILE: &str = "train_config.json";

/// A loaded network and the camera/scene setup to evaluate it under.
#[derive(Clone, Debug)]
pub struct Model {
    pub net: Network<f32>,
    pub setup: TrainConfig,
}

/// Loads `checkpoint`; the setup comes from `setup` when given, else from a
/// `train_config.json` next to the checkpoint, else the defaults. Network
/// fields of the setup always follow the checkpoint.
pub fn load_model(checkpoint: &Path, setup: Option<&Path>) -> Result<Model> {
    if !checkpoint.is_file() {
        return usage(format!("cannot read checkpoint {}", checkpoint.display()));
    }
    let net = Network::<f32>::load(checkpoint)
        .map_err(|e| CliError::Usage(format!("unreadable checkpoint {}: {e}", checkpoint.display())))?;
    let sibling: Option<PathBuf> = checkpoint.parent().map(|d| d.join(SETUP_FILE)).filter(|p| p.exists());
    let mut config = match setup.map(Path::to_path_buf).or(sibling) {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    let nc = net.config();
    config.head_mode = nc.head_mode;
    config.centering = nc.centering;
    config.context = nc.context;
    if net.trained_planes() > 0 {
        config.planes = net.trained_planes();
    }
    Ok(Model { net, setup: config })
}
