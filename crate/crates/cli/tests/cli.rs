mod common;

use std::path::Path;

use common::*;
use liveview_core::eval::EvalSummary;
use liveview_core::image::Image;
use liveview_core::metrics::psnr;
use liveview_core::mpi::load_mpi_dump;
use liveview_core::net::{Network, NetworkConfig};
use liveview_core::scene::generate_scene_with_depths;
use liveview_core::train::TrainConfig;

fn export(dir: &Path, setup: &TrainConfig) -> std::path::PathBuf {
    let setup_path = dir.join("setup.json");
    write_json(&setup_path, setup);
    let out = dir.join("export");
    liveview_ok(&["scene-export", "--out-dir", s(&out), "--setup", s(&setup_path), "--index", "1"]);
    out
}

fn untrained_checkpoint(dir: &Path, setup: &TrainConfig) -> std::path::PathBuf {
    let net = Network::<f32>::init(setup.network_config(), 11).unwrap();
    let path = dir.join("untrained.lvw");
    net.save(&path).unwrap();
    write_json(&dir.join("train_config.json"), setup);
    path
}

fn load_summary(path: &Path) -> EvalSummary {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_camera_file_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let setup = small_setup();
    let ex = export(dir.path(), &setup);
    let ckpt = untrained_checkpoint(dir.path(), &setup);
    let images: Vec<String> = (0..5).map(|i| ex.join(format!("view_{i}.png")).display().to_string()).collect();
    let out = dir.path().join("novel.png");
    let r = liveview(&[
        "synthesize",
        "--checkpoint",
        s(&ckpt),
        "--images",
        &images.join(","),
        "--cameras",
        s(&dir.path().join("nope.json")),
        "--out",
        s(&out),
    ]);
    assert!(!r.status.success());
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&r.stderr).contains("nope.json"));
}

#[test]
fn view_count_mismatch_and_bad_checkpoint_fail() {
    let dir = tempfile::tempdir().unwrap();
    let setup = small_setup();
    let ex = export(dir.path(), &setup);
    let ckpt = untrained_checkpoint(dir.path(), &setup);
    let images: Vec<String> = (0..4).map(|i| ex.join(format!("view_{i}.png")).display().to_string()).collect();
    let out = dir.path().join("novel.png");
    let cams = ex.join("cameras.json");
    let r = liveview(&["synthesize", "--checkpoint", s(&ckpt), "--images", &images.join(","), "--cameras", s(&cams), "--out", s(&out)]);
    assert!(!r.status.success());
    assert!(!out.exists());

    let garbage = dir.path().join("garbage.lvw");
    std::fs::write(&garbage, b"not a checkpoint").unwrap();
    let r = liveview(&["synthesize", "--checkpoint", s(&garbage), "--scene", s(&ex.join("scene")), "--out", s(&out)]);
    assert!(!r.status.success());
    assert!(!out.exists());
}

#[test]
fn exported_views_round_trip_through_synthesize() {
    let dir = tempfile::tempdir().unwrap();
    let setup = small_setup();
    let ex = export(dir.path(), &setup);
    let ckpt = untrained_checkpoint(dir.path(), &setup);
    let images: Vec<String> = (0..5).map(|i| ex.join(format!("view_{i}.png")).display().to_string()).collect();
    let out = dir.path().join("novel.png");
    let cams = ex.join("cameras.json");
    liveview_ok(&["synthesize", "--checkpoint", s(&ckpt), "--images", &images.join(","), "--cameras", s(&cams), "--out", s(&out)]);
    let img = Image::<f32>::load_png(&out).unwrap();
    assert_eq!((img.height(), img.width()), (setup.height, setup.width));
}

#[test]
fn single_plane_output_is_rgb_times_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let setup = small_setup();
    let ex = export(dir.path(), &setup);
    let out = dir.path().join("one.png");
    let dump = dir.path().join("dump");
    liveview_ok(&[
        "synthesize",
        "--checkpoint",
        s(trained_checkpoint()),
        "--scene",
        s(&ex.join("scene")),
        "--planes",
        "1",
        "--target-pose",
        "0.03,-0.02,0",
        "--out",
        s(&out),
        "--dump-mpi",
        s(&dump),
    ]);
    let (rgb, alpha, planes) = load_mpi_dump::<f64>(&dump).unwrap();
    assert_eq!(planes.len(), 1);
    let img = Image::<f64>::load_png(&out).unwrap();
    let hw = setup.height * setup.width;
    let mut worst = 0.0f64;
    for c in 0..3 {
        for i in 0..hw {
            let want = rgb.data()[c * hw + i] * alpha.data()[i];
            worst = worst.max((img.data()[c * hw + i] - want).abs());
        }
    }
    // 8-bit output and 8-bit dump colours each round by half a step
    assert!(worst <= 1.0 / 255.0 + 1e-9, "max deviation {worst}");
}

#[test]
fn identity_view_of_a_planar_scene_is_reproduced() {
    let dir = tempfile::tempdir().unwrap();
    let setup = small_setup();
    let scene = generate_scene_with_depths(5, &setup.scene_config().unwrap(), &[6.0]).unwrap();
    scene.save(dir.path().join("scene")).unwrap();
    let setup_path = dir.path().join("setup.json");
    write_json(&setup_path, &setup);
    let b = setup.baseline;
    for pose in [format!("{b},0,0"), format!("0,{},0", -b)] {
        let out = dir.path().join("id.png");
        let stdout = liveview_ok(&[
            "synthesize",
            "--checkpoint",
            s(trained_checkpoint()),
            "--setup",
            s(&setup_path),
            "--scene",
            s(&dir.path().join("scene")),
            "--planes",
            "32",
            "--target-pose",
            &pose,
            "--out",
            s(&out),
        ]);
        let rig = setup.rig().unwrap();
        let p: Vec<f64> = pose.split(',').map(|v| v.parse().unwrap()).collect();
        let cam = rig.camera_at(p[0], p[1], p[2]);
        let gt: Image<f64> = liveview_core::scene::render_ground_truth(&scene, &cam);
        let got = Image::<f64>::load_png(&out).unwrap();
        let quantized = Image::new(3, gt.height(), gt.width(), gt.data().iter().map(|v| (v * 255.0).round() / 255.0).collect()).unwrap();
        let db = psnr(&got, &quantized).unwrap();
        assert!(db > 40.0, "pose {pose}: {db:.2} dB ({stdout})");
    }
}

#[test]
fn evaluate_is_deterministic_and_reports_selection_rows() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained_checkpoint();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        liveview_ok(&[
            "evaluate",
            "--checkpoint",
            s(ckpt),
            "--num-scenes",
            "3",
            "--planes",
            "8,4",
            "--select-k",
            "4",
            "--keyframe-planes",
            "16",
            "--seed",
            "9",
            "--threads",
            "1",
            "--json",
            s(p),
        ]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let summary = load_summary(&a);
    assert_eq!(summary.num_scenes, 3);
    for label in ["nearest_view", "uniform_8", "uniform_4", "select_4_of_16"] {
        let row = summary.row(label).unwrap_or_else(|| panic!("missing row {label}"));
        assert_eq!(row.per_scene_psnr.len(), 3);
    }
}

#[test]
fn trained_checkpoint_beats_untrained() {
    let dir = tempfile::tempdir().unwrap();
    let setup = small_setup();
    let untrained = untrained_checkpoint(dir.path(), &setup);
    let mut means = Vec::new();
    for ckpt in [trained_checkpoint(), untrained.as_path()] {
        let json = dir.path().join("summary.json");
        liveview_ok(&["evaluate", "--checkpoint", s(ckpt), "--num-scenes", "6", "--planes", "8", "--json", s(&json)]);
        means.push(load_summary(&json).row("uniform_8").unwrap().psnr.mean);
    }
    assert!(means[0] > means[1], "trained {:.2} dB vs untrained {:.2} dB", means[0], means[1]);
}

#[test]
fn benchmark_covers_every_mode_and_plane_count() {
    let dir = tempfile::tempdir().unwrap();
    let setup = TrainConfig { width: 32, height: 32, focal: 32.0, ..small_setup() };
    let setup_path = dir.path().join("setup.json");
    write_json(&setup_path, &setup);
    let ckpt = untrained_checkpoint(dir.path(), &setup);
    let csv_path = dir.path().join("bench.csv");
    liveview_ok(&[
        "benchmark",
        "--checkpoint",
        s(&ckpt),
        "--setup",
        s(&setup_path),
        "--plane-counts",
        "8,16,32,64",
        "--runs",
        "5",
        "--warmup",
        "1",
        "--out",
        s(&csv_path),
    ]);
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4 * 4);
    let modes = ["dynamic_target", "static_target", "dynamic_input", "static_input"];
    for mode in modes {
        let mine: Vec<&csv::StringRecord> = rows.iter().filter(|r| &r[0] == mode).collect();
        let planes: Vec<usize> = mine.iter().map(|r| r[2].parse().unwrap()).collect();
        assert_eq!(planes, vec![8, 16, 32, 64], "{mode}");
        let opx = |d: usize| -> f64 { mine.iter().find(|r| r[2].parse::<usize>().unwrap() == d).unwrap()[5].parse().unwrap() };
        assert_eq!(opx(32) * 2.0, opx(64), "{mode}");
        for r in &mine {
            assert!(r[3].parse::<f64>().unwrap() > 0.0);
        }
    }
}

#[test]
fn benchmark_rejects_too_few_runs() {
    let dir = tempfile::tempdir().unwrap();
    let setup = small_setup();
    let ckpt = untrained_checkpoint(dir.path(), &setup);
    let r = liveview(&["benchmark", "--checkpoint", s(&ckpt), "--runs", "3"]);
    assert!(!r.status.success());
}

fn write_script(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("script.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn video_with_zero_frames_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let setup = small_setup();
    let ckpt = untrained_checkpoint(dir.path(), &setup);
    let script = write_script(dir.path(), r#"{"frames": 0, "scene_seed": 3}"#);
    let out = dir.path().join("video");
    liveview_ok(&["video", "--scene-script", s(&script), "--checkpoint", s(&ckpt), "--out-dir", s(&out)]);
    let frames = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png")).count();
    assert_eq!(frames, 0);
    let mut reader = csv::Reader::from_path(out.join("frames.csv")).unwrap();
    assert_eq!(reader.records().count(), 0);
}

#[test]
fn video_selecting_every_plane_matches_full_rendering() {
    let dir = tempfile::tempdir().unwrap();
    let setup = small_setup();
    let ckpt = untrained_checkpoint(dir.path(), &setup);
    let script = write_script(
        dir.path(),
        r#"{"frames": 3, "scene_seed": 4,
            "target_path": [{"frame": 0, "position": [0.0, 0.0, 0.0]}, {"frame": 2, "position": [0.05, 0.02, 0.0]}],
            "motions": [{"quad": 1, "velocity": [0.01, 0.0]}]}"#,
    );
    let out = dir.path().join("video");
    liveview_ok(&[
        "video",
        "--scene-script",
        s(&script),
        "--checkpoint",
        s(&ckpt),
        "--keyframe-planes",
        "16",
        "--select-k",
        "16",
        "--compare-full",
        "--out-dir",
        s(&out),
    ]);
    let mut reader = csv::Reader::from_path(out.join("frames.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(&r[1], "16");
        assert_eq!(r[3], r[5], "psnr differs from full rendering");
        assert_eq!(r[4], r[6], "ssim differs from full rendering");
    }
    assert!(out.join("frame_0002.png").exists());
}

#[test]
fn malformed_script_fails() {
    let dir = tempfile::tempdir().unwrap();
    let setup = small_setup();
    let ckpt = untrained_checkpoint(dir.path(), &setup);
    for text in [r#"{"frames": 2, "bogus": 1}"#, "{not json", r#"{"frames": 2, "motions": [{"quad": 99, "velocity": [0, 0]}]}"#] {
        let script = write_script(dir.path(), text);
        let r = liveview(&["video", "--scene-script", s(&script), "--checkpoint", s(&ckpt), "--out-dir", s(&dir.path().join("v"))]);
        assert!(!r.status.success(), "accepted {text}");
    }
}

#[test]
fn train_writes_checkpoint_log_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    liveview_ok(&[
        "train",
        "--out-dir",
        s(&out),
        "--iterations",
        "2",
        "--width",
        "16",
        "--height",
        "16",
        "--focal",
        "16",
        "--planes",
        "2",
        "--val-every",
        "0",
    ]);
    let net = Network::<f32>::load(out.join("checkpoint.lvw")).unwrap();
    assert_eq!(net.config().num_views, NetworkConfig::new(5).unwrap().num_views);
    let mut reader = csv::Reader::from_path(out.join("train_log.csv")).unwrap();
    assert_eq!(reader.records().count(), 2);
    let saved: TrainConfig = serde_json::from_str(&std::fs::read_to_string(out.join("train_config.json")).unwrap()).unwrap();
    assert_eq!(saved.iterations, 2);
}
