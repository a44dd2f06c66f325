mod common;

use std::time::Duration;

use futures::{SinkExt, StreamExt};
use liveview_core::image::Image;
use liveview_core::metrics::psnr;
use liveview_server::protocol::{FrameHeader, FLAG_PNG};
use liveview_server::AppState;
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use common::*;

type Socket = WebSocketStream<MaybeTlsStream<tokio::net::TcpStream>>;

async fn connect(addr: &str, query: &str) -> Socket {
    connect_async(format!("ws://{addr}/stream{query}")).await.unwrap().0
}

enum Reply {
    Frame(FrameHeader, Vec<u8>),
    Error(Value),
}

async fn next(ws: &mut Socket) -> Reply {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(120), ws.next()).await.unwrap().unwrap().unwrap();
        match msg {
            Message::Binary(b) => {
                let (h, payload) = FrameHeader::decode(&b).unwrap();
                return Reply::Frame(h, payload.to_vec());
            }
            Message::Text(t) => return Reply::Error(serde_json::from_str(&t).unwrap()),
            _ => continue,
        }
    }
}

async fn frame(ws: &mut Socket) -> (FrameHeader, Vec<u8>) {
    match next(ws).await {
        Reply::Frame(h, p) => (h, p),
        Reply::Error(e) => panic!("unexpected error message {e}"),
    }
}

async fn send(ws: &mut Socket, v: Value) {
    ws.send(Message::Text(v.to_string())).await.unwrap();
}

fn pose(seq: u32, c: [f64; 3]) -> Value {
    json!({ "seq": seq, "c": c, "look_at": [c[0], c[1], c[2] + 1.0], "up": [0.0, -1.0, 0.0] })
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn pose_at_an_input_camera_reproduces_that_view() {
    let setup = small_setup();
    let scene = scene(&setup, 5);
    let e = engine(trained().clone(), setup.clone(), scene, 32);
    let b = setup.baseline;
    let views: Vec<Image<f32>> = e.synth.views().to_vec();
    let state = AppState::with_engine(e, 2);
    let addr = spawn(state).await;
    let mut ws = connect(&addr, "").await;
    for (i, c) in [[0.0, 0.0, 0.0], [b, 0.0, 0.0], [0.0, -b, 0.0]].into_iter().enumerate() {
        send(&mut ws, pose(i as u32, c)).await;
        let (h, payload) = frame(&mut ws).await;
        assert_eq!(h.seq, i as u32);
        assert_eq!((h.width, h.height, h.planes_used), (48, 48, 32));
        assert!(!h.clamped());
        let got = Image::<f64>::from_rgb8(48, 48, &payload).unwrap();
        let view = [0, 2, 3][i];
        let expected = Image::<f64>::from_rgb8(48, 48, &views[view].to_rgb8()).unwrap();
        let p = psnr(&got, &expected).unwrap();
        assert!(p > 40.0, "view {view}: {p:.2} dB");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn k_planes_change_takes_effect_on_the_next_frame() {
    let setup = small_setup();
    let state = AppState::with_engine(engine(untrained(5), setup.clone(), scene(&setup, 6), 64), 2);
    let addr = spawn(state).await;
    let mut ws = connect(&addr, "").await;
    let mut p = pose(1, [0.01, 0.0, 0.0]);
    p["k_planes"] = json!(64);
    send(&mut ws, p.clone()).await;
    assert_eq!(frame(&mut ws).await.0.planes_used, 64);
    p["seq"] = json!(2);
    p["k_planes"] = json!(16);
    send(&mut ws, p.clone()).await;
    assert_eq!(frame(&mut ws).await.0.planes_used, 16);
    p["seq"] = json!(3);
    p["k_planes"] = json!(65);
    send(&mut ws, p).await;
    match next(&mut ws).await {
        Reply::Error(e) => assert_eq!(e["seq"], 3),
        Reply::Frame(..) => panic!("k above D must be refused"),
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn flooded_poses_come_back_in_order_with_stale_ones_dropped() {
    let setup = small_setup();
    let state = AppState::with_engine(engine(untrained(5), setup.clone(), scene(&setup, 7), 8), 2);
    let addr = spawn(state).await;
    let mut ws = connect(&addr, "").await;
    let mut interval = tokio::time::interval(Duration::from_millis(1));
    for seq in 0..100u32 {
        interval.tick().await;
        send(&mut ws, pose(seq, [0.001 * seq as f64, 0.0, 0.0])).await;
    }
    let mut seqs = Vec::new();
    loop {
        let (h, _) = frame(&mut ws).await;
        seqs.push(h.seq);
        if h.seq == 99 {
            break;
        }
    }
    assert!(seqs.windows(2).all(|w| w[0] < w[1]), "{seqs:?}");
    assert!(seqs.len() <= 100);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn malformed_pose_gets_an_error_and_the_session_survives() {
    let setup = small_setup();
    let state = AppState::with_engine(engine(untrained(5), setup.clone(), scene(&setup, 8), 8), 2);
    let addr = spawn(state).await;
    let mut ws = connect(&addr, "").await;
    ws.send(Message::Text(r#"{"seq": 41, "c": "nowhere"}"#.into())).await.unwrap();
    match next(&mut ws).await {
        Reply::Error(e) => {
            assert_eq!(e["seq"], 41);
            assert!(e["error"].as_str().unwrap().contains("malformed"));
        }
        Reply::Frame(..) => panic!("expected an error message"),
    }
    ws.send(Message::Text("not json".into())).await.unwrap();
    assert!(matches!(next(&mut ws).await, Reply::Error(e) if e["seq"].is_null()));
    send(&mut ws, pose(42, [0.0, 0.0, 0.0])).await;
    assert_eq!(frame(&mut ws).await.0.seq, 42);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn poses_outside_the_hull_are_clamped_and_flagged() {
    let setup = small_setup();
    let e = engine(untrained(5), setup.clone(), scene(&setup, 9), 8);
    let max_x = e.hull.max[0];
    let state = AppState::with_engine(e, 2);
    let addr = spawn(state).await;
    let mut ws = connect(&addr, "").await;
    send(&mut ws, pose(1, [10.0, 0.0, 0.0])).await;
    let (far, far_px) = frame(&mut ws).await;
    assert!(far.clamped());
    send(&mut ws, pose(2, [max_x, 0.0, 0.0])).await;
    let (edge, edge_px) = frame(&mut ws).await;
    assert!(!edge.clamped());
    assert_eq!(far_px, edge_px);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn same_pose_gives_identical_frames_and_png_mode_matches() {
    let setup = small_setup();
    let state = AppState::with_engine(engine(untrained(5), setup.clone(), scene(&setup, 10), 8), 3);
    let addr = spawn(state).await;
    let mut ws = connect(&addr, "").await;
    send(&mut ws, pose(1, [0.02, -0.01, 0.0])).await;
    let (_, a) = frame(&mut ws).await;
    send(&mut ws, pose(2, [0.02, -0.01, 0.0])).await;
    let (_, b) = frame(&mut ws).await;
    assert_eq!(a, b);

    let mut png_ws = connect(&addr, "?format=png").await;
    send(&mut png_ws, pose(1, [0.02, -0.01, 0.0])).await;
    let (h, png) = frame(&mut png_ws).await;
    assert_ne!(h.flags & FLAG_PNG, 0);
    let decoded = image::load_from_memory(&png).unwrap().to_rgb8();
    assert_eq!(decoded.as_raw(), &a);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn session_limit_is_enforced() {
    let setup = small_setup();
    let state = AppState::with_engine(engine(untrained(5), setup.clone(), scene(&setup, 11), 8), 1);
    let addr = spawn(state.clone()).await;
    let mut first = connect(&addr, "").await;
    assert!(connect_async(format!("ws://{addr}/stream")).await.is_err());
    send(&mut first, pose(1, [0.0; 3])).await;
    frame(&mut first).await;
    first.close(None).await.unwrap();
    drop(first);
    for _ in 0..100 {
        if state.active_sessions() == 0 {
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    assert!(connect_async(format!("ws://{addr}/stream")).await.is_ok());
}
