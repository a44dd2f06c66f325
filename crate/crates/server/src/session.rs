//! One `/stream` connection: a latest-wins pose mailbox feeding a single
//! render worker.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket};
use futures::{SinkExt, StreamExt};
use liveview_core::geometry::PlaneSet;
use liveview_core::mpi::select_planes;
use tokio::sync::{mpsc, watch};

use crate::engine::Engine;
use crate::protocol::{ErrorMessage, FrameHeader, PoseMessage, FLAG_CLAMPED, FLAG_PNG};
use crate::state::{AppState, LatencyWindow, SessionGuard};

/// Per-connection bookkeeping.
#[derive(Clone, Debug)]
pub struct SessionState {
    pub checkpoint_id: String,
    pub scene_id: String,
    pub planes: PlaneSet,
    /// K requested through `k_planes`, with the planes chosen for it.
    pub selected: Option<(usize, PlaneSet)>,
    pub frames: u64,
    pub latency: LatencyWindow,
    pub last_seq: Option<u32>,
    pub png: bool,
}

impl SessionState {
    pub fn new(engine: &Engine, png: bool) -> Self {
        Self {
            checkpoint_id: engine.checkpoint_id.clone(),
            scene_id: engine.scene_id.clone(),
            planes: engine.planes.clone(),
            selected: None,
            frames: 0,
            latency: LatencyWindow::new(LatencyWindow::DEFAULT_CAPACITY),
            last_seq: None,
            png,
        }
    }
}

fn error_message(seq: Option<u32>, error: impl Into<String>) -> Message {
    let body = ErrorMessage { seq, error: error.into() };
    Message::Text(serde_json::to_string(&body).expect("error message serializes"))
}

/// Renders one pose; `Ok(None)` means the pose was stale and dropped.
pub fn serve_pose(
    state: &AppState,
    engine: &Engine,
    session: &mut SessionState,
    pose: &PoseMessage,
) -> Result<Option<Vec<u8>>, String> {
    if session.last_seq.is_some_and(|last| pose.seq < last) {
        return Ok(None);
    }
    let d = engine.planes.len();
    let (camera, clamped) = engine.camera_for(pose).map_err(|e| e.to_string())?;
    let planes = match pose.k_planes {
        Some(k) if k == 0 || k > d => return Err(format!("k_planes must be in 1..={d}, got {k}")),
        Some(k) if k == d => {
            session.selected = None;
            engine.planes.clone()
        }
        Some(k) => match &session.selected {
            Some((sk, planes)) if *sk == k => planes.clone(),
            _ => {
                let alpha = match state.planes.read().expect("plane state lock").last_full_alpha.clone() {
                    Some(a) => a,
                    None => {
                        let full = engine.render(&camera, &engine.planes).map_err(|e| e.to_string())?;
                        state.record_full_alpha(&full.rendering.alpha);
                        full.rendering.alpha
                    }
                };
                let sel = select_planes(&alpha, k).map_err(|e| e.to_string())?;
                let planes = engine.planes.subset(&sel.indices).map_err(|e| e.to_string())?;
                session.selected = Some((k, planes.clone()));
                planes
            }
        },
        None => match (&session.selected, state.selection()) {
            (Some((_, planes)), _) => planes.clone(),
            (None, Some(sel)) => sel.planes,
            (None, None) => engine.planes.clone(),
        },
    };
    let frame = engine.render(&camera, &planes).map_err(|e| e.to_string())?;
    if planes.len() == d {
        state.record_full_alpha(&frame.rendering.alpha);
    }
    session.planes = planes;
    session.frames += 1;
    session.latency.push(frame.render_ms);
    session.last_seq = Some(pose.seq);
    if session.frames % LatencyWindow::DEFAULT_CAPACITY as u64 == 0 {
        tracing::debug!(frames = session.frames, mean_ms = session.latency.mean(), "session latency");
    }
    let image = &frame.rendering.image;
    let (w, h) = (image.width() as u32, image.height() as u32);
    let mut flags = if clamped { FLAG_CLAMPED } else { 0 };
    let payload = if session.png {
        flags |= FLAG_PNG;
        let mut bytes = Vec::new();
        let buf = image::RgbImage::from_raw(w, h, image.to_rgb8()).expect("buffer sized for image");
        buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
            .map_err(|e| e.to_string())?;
        bytes
    } else {
        image.to_rgb8()
    };
    let header = FrameHeader {
        seq: pose.seq,
        width: w,
        height: h,
        render_ms: frame.render_ms as f32,
        planes_used: session.planes.len() as u32,
        flags,
    };
    Ok(Some(header.encode(&payload)))
}

pub async fn run_session(socket: WebSocket, state: Arc<AppState>, engine: Arc<Engine>, guard: SessionGuard, png: bool) {
    let (mut sink, mut inbound) = socket.split();
    let (out_tx, mut out_rx) = mpsc::channel::<Message>(8);
    let (pose_tx, mut pose_rx) = watch::channel::<Option<PoseMessage>>(None);

    let writer = tokio::spawn(async move {
        while let Some(m) = out_rx.recv().await {
            if sink.send(m).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    let worker_tx = out_tx.clone();
    let worker = tokio::spawn(async move {
        let mut session = Some(SessionState::new(&engine, png));
        while pose_rx.changed().await.is_ok() {
            let Some(pose) = pose_rx.borrow_and_update().clone() else { continue };
            let (st, en) = (state.clone(), engine.clone());
            let mut s = session.take().expect("session present between frames");
            let joined = tokio::task::spawn_blocking(move || {
                let r = serve_pose(&st, &en, &mut s, &pose);
                (s, pose.seq, r)
            })
            .await;
            let Ok((s, seq, result)) = joined else { break };
            session = Some(s);
            let msg = match result {
                Ok(Some(bytes)) => Message::Binary(bytes),
                Ok(None) => continue,
                Err(e) => error_message(Some(seq), e),
            };
            if worker_tx.send(msg).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(msg)) = inbound.next().await {
        match msg {
            Message::Text(text) => match serde_json::from_str::<PoseMessage>(&text) {
                Ok(pose) => {
                    pose_tx.send_replace(Some(pose));
                }
                Err(e) => {
                    let seq = serde_json::from_str::<serde_json::Value>(&text)
                        .ok()
                        .and_then(|v| v.get("seq")?.as_u64())
                        .and_then(|s| u32::try_from(s).ok());
                    if out_tx.send(error_message(seq, format!("malformed pose: {e}"))).await.is_err() {
                        break;
                    }
                }
            },
            Message::Binary(_) => {
                if out_tx.send(error_message(None, "poses must be JSON text messages")).await.is_err() {
                    break;
                }
            }
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => {}
        }
    }
    drop(pose_tx);
    let _ = worker.await;
    drop(out_tx);
    let _ = writer.await;
    drop(guard);
}
