#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use liveview_core::net::{Network, NetworkConfig};
use liveview_core::scene::{generate_scene, Scene};
use liveview_core::train::{self, TrainConfig};
use liveview_server::{AppState, Engine};

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

/// Full default configuration, shared with the acceptance checkpoints.
pub fn default_setup() -> TrainConfig {
    TrainConfig { val_every: 0, val_scenes: 0, ..TrainConfig::default() }
}

fn cached(config: &TrainConfig) -> Network<f32> {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("liveview-{}", config.fingerprint()));
    if let Ok(net) = Network::load(train::checkpoint_path(&dir)) {
        return net;
    }
    train::train::<f32>(config, Some(&dir)).expect("training succeeds").0
}

pub fn trained() -> &'static Network<f32> {
    static NET: OnceLock<Network<f32>> = OnceLock::new();
    NET.get_or_init(|| cached(&small_setup()))
}

pub fn default_trained() -> &'static Network<f32> {
    static NET: OnceLock<Network<f32>> = OnceLock::new();
    NET.get_or_init(|| cached(&default_setup()))
}

pub fn untrained(views: usize) -> Network<f32> {
    Network::init(NetworkConfig::new(views).unwrap(), 3).unwrap()
}

pub fn scene(setup: &TrainConfig, seed: u64) -> Scene {
    generate_scene(seed, &setup.scene_config().unwrap())
}

pub fn engine(net: Network<f32>, setup: TrainConfig, scene: Scene, planes: usize) -> Engine {
    Engine::new(net, setup, scene, "test-scene".into(), "test.lvw".into(), planes).unwrap()
}

/// Starts the service on an ephemeral port and returns its address.
pub async fn spawn(state: Arc<AppState>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(liveview_server::serve(listener, state));
    format!("127.0.0.1:{}", addr.port())
}
