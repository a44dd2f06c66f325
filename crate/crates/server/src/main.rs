use std::path::PathBuf;

use clap::Parser;
use liveview_server::{AppState, Engine, EngineConfig, SceneSource};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "liveview-server", version, about = "Streams synthesized views over a websocket")]
struct Args {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Scene setup JSON (default: `train_config.json` beside the checkpoint).
    #[arg(long)]
    setup: Option<PathBuf>,
    /// Scene directory or `scene.json`; a procedural scene when omitted.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    scene_seed: u64,
    /// Full plane count D.
    #[arg(long, default_value_t = 64)]
    planes: usize,
    #[arg(long, default_value_t = 4)]
    max_sessions: usize,
}

#[tokio::main]
async fn main() -> std::process::ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("LIVEVIEW_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let listener = match tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}:{}: {e}", args.host, args.port);
            return std::process::ExitCode::FAILURE;
        }
    };
    let state = AppState::new(args.max_sessions);
    let config = EngineConfig {
        checkpoint: args.checkpoint,
        setup: args.setup,
        scene: args.scene.map_or(SceneSource::Procedural(args.scene_seed), SceneSource::File),
        planes: args.planes,
    };
    let loader = state.clone();
    tokio::task::spawn_blocking(move || match Engine::load(&config) {
        Ok(engine) => {
            tracing::info!(checkpoint = %engine.checkpoint_id, scene = %engine.scene_id, "ready");
            loader.install(engine);
        }
        Err(e) => {
            tracing::error!("failed to load: {e}");
            std::process::exit(1);
        }
    });
    tracing::info!(addr = %listener.local_addr().map(|a| a.to_string()).unwrap_or_default(), "listening");
    match liveview_server::serve(listener, state).await {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}
