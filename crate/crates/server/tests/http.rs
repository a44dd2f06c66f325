mod common;

use std::time::Instant;

use liveview_core::geometry::equidisparity_planes;
use liveview_core::scene::generate_scene_with_depths;
use liveview_core::train::TrainConfig;
use liveview_server::AppState;
use serde_json::{json, Value};

use common::*;

#[tokio::test]
async fn endpoints_answer_503_before_the_checkpoint_loads() {
    let state = AppState::new(2);
    let addr = spawn(state).await;
    let health: Value = reqwest::get(format!("http://{addr}/health")).await.unwrap().json().await.unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["ready"], false);
    assert_eq!(reqwest::get(format!("http://{addr}/info")).await.unwrap().status(), 503);
    let r = reqwest::Client::new()
        .post(format!("http://{addr}/select_planes"))
        .json(&json!({"k": 2}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), 503);
}

#[tokio::test]
async fn info_is_stable_and_reports_accounting() {
    let setup = TrainConfig { width: 48, height: 32, focal: 48.0, ..small_setup() };
    let state = AppState::with_engine(engine(untrained(5), setup.clone(), scene(&setup, 1), 64), 2);
    let addr = spawn(state).await;
    let a = reqwest::get(format!("http://{addr}/info")).await.unwrap().text().await.unwrap();
    let b = reqwest::get(format!("http://{addr}/info")).await.unwrap().text().await.unwrap();
    assert_eq!(a, b);
    let info: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(info["V"], 5);
    assert_eq!(info["D"], 64);
    assert_eq!(info["K"], 64);
    assert_eq!((info["width"].as_u64(), info["height"].as_u64()), (Some(48), Some(32)));
    let params = info["param_count"].as_f64().unwrap();
    assert!((params - 391_000.0).abs() / 391_000.0 < 0.02, "param_count {params}");
    assert!(info["opx"].as_f64().unwrap() > 0.0);
    assert_eq!(info["plane_depths"].as_array().unwrap().len(), 64);
    assert!(info["hull"]["min"].is_array());
}

#[tokio::test]
async fn select_planes_validates_k_and_returns_depths() {
    let setup = small_setup();
    let state = AppState::with_engine(engine(untrained(5), setup.clone(), scene(&setup, 2), 12), 2);
    let addr = spawn(state).await;
    let client = reqwest::Client::new();
    let post = |k: i64| client.post(format!("http://{addr}/select_planes")).json(&json!({ "k": k })).send();
    assert_eq!(post(0).await.unwrap().status(), 400);
    assert_eq!(post(13).await.unwrap().status(), 400);
    let all: Value = post(12).await.unwrap().json().await.unwrap();
    let expected = equidisparity_planes(setup.z_near, setup.z_far, 12).unwrap();
    let depths: Vec<f64> = all["depths"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(depths, expected.depths());
    let some: Value = post(3).await.unwrap().json().await.unwrap();
    assert_eq!(some["depths"].as_array().unwrap().len(), 3);
    let info: Value = reqwest::get(format!("http://{addr}/info")).await.unwrap().json().await.unwrap();
    assert_eq!(info["K"], 3);
}

#[tokio::test]
async fn two_depth_scene_selects_its_two_depths() {
    let setup = default_setup();
    let planes = equidisparity_planes(setup.z_near, setup.z_far, setup.planes).unwrap();
    let (near, far) = (planes.depths()[4], planes.depths()[15]);
    let scene = generate_scene_with_depths(21, &setup.scene_config().unwrap(), &[near, far]).unwrap();
    assert_eq!(scene.depths(), vec![near, far]);
    let state = AppState::with_engine(engine(default_trained().clone(), setup, scene, 16), 2);
    let addr = spawn(state).await;
    let r: Value = reqwest::Client::new()
        .post(format!("http://{addr}/select_planes"))
        .json(&json!({"k": 2}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let depths: Vec<f64> = r["depths"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(depths, vec![near, far]);
}

#[test]
fn render_ms_matches_the_wall_time_of_the_call() {
    let setup = small_setup();
    let e = engine(untrained(5), setup.clone(), scene(&setup, 3), 16);
    for _ in 0..3 {
        let started = Instant::now();
        let frame = e.render(&e.rig.center_camera(), &e.planes).unwrap();
        let outer = started.elapsed().as_secs_f64() * 1e3;
        assert!(outer >= frame.render_ms && outer - frame.render_ms < 1.0);
    }
}
