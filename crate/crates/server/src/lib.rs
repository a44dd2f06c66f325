//! Streaming render service: loads a checkpoint and scene, then serves
//! synthesized frames for client-steered target poses.

pub mod engine;
pub mod error;
pub mod protocol;
pub mod session;
pub mod state;

use std::sync::Arc;

use axum::extract::ws::WebSocketUpgrade;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use engine::{Engine, EngineConfig, Hull, Info, SceneSource};
pub use error::{Result, ServerError};
pub use state::AppState;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/info", get(info))
        .route("/select_planes", post(select))
        .route("/stream", get(stream))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

fn unavailable(reason: &str) -> Response {
    (StatusCode::SERVICE_UNAVAILABLE, Json(json!({ "error": reason }))).into_response()
}

fn bad_request(reason: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": reason }))).into_response()
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "ready": state.engine().is_some(),
        "sessions": state.active_sessions(),
    }))
}

async fn info(State(state): State<Arc<AppState>>) -> Response {
    let Some(engine) = state.engine() else { return unavailable("checkpoint is still loading") };
    let k = state.selection().map_or(engine.planes.len(), |s| s.k);
    Json(engine.info(k)).into_response()
}

#[derive(Debug, Deserialize)]
pub struct SelectRequest {
    pub k: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SelectResponse {
    pub k: usize,
    pub indices: Vec<usize>,
    pub depths: Vec<f64>,
}

async fn select(State(state): State<Arc<AppState>>, Json(req): Json<SelectRequest>) -> Response {
    let Some(engine) = state.engine() else { return unavailable("checkpoint is still loading") };
    let d = engine.planes.len();
    if req.k == 0 || req.k > d {
        return bad_request(format!("k must be in 1..={d}, got {}", req.k));
    }
    let st = state.clone();
    match tokio::task::spawn_blocking(move || st.select(&engine, req.k)).await {
        Ok(Ok(sel)) => Json(SelectResponse { k: sel.k, indices: sel.indices, depths: sel.planes.depths().to_vec() })
            .into_response(),
        Ok(Err(e)) => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": e.to_string() }))).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": e.to_string() }))).into_response(),
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct StreamQuery {
    /// `png` for PNG payloads instead of raw RGB8.
    #[serde(default)]
    pub format: Option<String>,
}

async fn stream(State(state): State<Arc<AppState>>, Query(q): Query<StreamQuery>, ws: WebSocketUpgrade) -> Response {
    let Some(engine) = state.engine() else { return unavailable("checkpoint is still loading") };
    let Some(guard) = state.try_open_session() else { return unavailable("session limit reached") };
    let png = q.format.as_deref() == Some("png");
    ws.on_upgrade(move |socket| session::run_session(socket, state, engine, guard, png))
}
