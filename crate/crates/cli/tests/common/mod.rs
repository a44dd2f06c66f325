#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use liveview_core::train::{self, TrainConfig};

/// Small but trained model shared by the tests that need sensible output.
pub fn small_setup() -> TrainConfig {
    TrainConfig {
        width: 48,
        height: 48,
        focal: 48.0,
        planes: 8,
        iterations: 400,
        val_every: 0,
        val_scenes: 0,
        ..TrainConfig::default()
    }
}

/// Trains `config` once and caches the checkpoint under the cargo temp dir,
/// keyed by the config fingerprint. Returns the checkpoint path.
pub fn cached_checkpoint(config: &TrainConfig) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("liveview-{}", config.fingerprint()));
    let path = train::checkpoint_path(&dir);
    if !path.exists() {
        train::train::<f32>(config, Some(&dir)).expect("training succeeds");
    }
    path
}

pub fn trained_checkpoint() -> &'static Path {
    static PATH: OnceLock<PathBuf> = OnceLock::new();
    PATH.get_or_init(|| cached_checkpoint(&small_setup()))
}

pub fn liveview(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liveview"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn liveview_ok(args: &[&str]) -> String {
    let out = liveview(args);
    assert!(
        out.status.success(),
        "liveview {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
