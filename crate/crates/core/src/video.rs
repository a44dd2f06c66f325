//! Video rendering with plane selection amortized over frames.

use std::time::Instant;

use liveview_tensor::Scalar;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::geometry::{equidisparity_planes, PlaneSet};
use crate::image::Image;
use crate::metrics::{psnr, ssim};
use crate::mpi::select_planes;
use crate::net::Network;
use crate::scene::{example_for_target, generate_scene, Scene, SceneScript};
use crate::synth::Synthesizer;
use crate::train::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoOptions {
    /// Uniform planes rendered on frame 0.
    pub keyframe_planes: usize,
    /// Planes kept for every later frame.
    pub select_k: usize,
    /// Also render every frame with all keyframe planes.
    pub compare_full: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame: usize,
    pub planes_used: usize,
    pub render_ms: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub full_psnr: Option<f64>,
    pub full_ssim: Option<f64>,
}

/// One rendered frame handed to the caller.
pub struct Frame<'a, T> {
    pub report: &'a FrameReport,
    pub image: &'a Image<T>,
    pub full_image: Option<&'a Image<T>>,
    pub ground_truth: &'a Image<T>,
}

/// Scene the script animates: its file when given, else a procedural
/// scene from `scene_seed` under `setup`.
pub fn script_scene(script: &SceneScript, setup: &TrainConfig) -> Result<Scene> {
    match &script.scene_path {
        Some(p) => Scene::load(p),
        None => Ok(generate_scene(script.scene_seed, &setup.scene_config()?)),
    }
}

/// Renders every frame of `script`. Frame 0 uses all keyframe planes and
/// fixes the selection; later frames use only the selected planes.
pub fn render_video<T: Scalar>(
    net: &Network<T>,
    setup: &TrainConfig,
    script: &SceneScript,
    options: VideoOptions,
    mut on_frame: impl FnMut(Frame<'_, T>) -> Result<()>,
) -> Result<Vec<FrameReport>> {
    if options.select_k == 0 || options.select_k > options.keyframe_planes {
        return contract(format!(
            "select_k must be in 1..={}, got {}",
            options.keyframe_planes, options.select_k
        ));
    }
    let rig = setup.rig()?;
    let base = script_scene(script, setup)?;
    let full_planes = equidisparity_planes(setup.z_near, setup.z_far, options.keyframe_planes)?;
    let mut selected: Option<PlaneSet> = None;
    let mut reports = Vec::with_capacity(script.frames);
    for frame in 0..script.frames {
        let scene = script.scene_at(&base, frame)?;
        let [x, y, z] = script.target_position(frame);
        let ex = example_for_target::<T>(&scene, &rig, rig.camera_at(x, y, z));
        let synth = Synthesizer::new(net.clone(), ex.inputs, ex.cameras, rig.reference_index())?;
        let started = Instant::now();
        let (image, planes_used, full) = match &selected {
            None => {
                let r = synth.render(&ex.target_camera, &full_planes)?;
                let sel = select_planes(&r.alpha, options.select_k)?;
                selected = Some(full_planes.subset(&sel.indices)?);
                let n = full_planes.len();
                (r.image.clone(), n, Some(r.image))
            }
            Some(planes) => {
                let r = synth.render(&ex.target_camera, planes)?;
                (r.image, planes.len(), None)
            }
        };
        let render_ms = started.elapsed().as_secs_f64() * 1e3;
        let full = match (full, options.compare_full) {
            (Some(f), _) => Some(f),
            (None, true) => Some(synth.render(&ex.target_camera, &full_planes)?.image),
            (None, false) => None,
        };
        let report = FrameReport {
            frame,
            planes_used,
            render_ms,
            psnr: psnr(&image, &ex.target)?,
            ssim: ssim(&image, &ex.target)?,
            full_psnr: full.as_ref().map(|f| psnr(f, &ex.target)).transpose()?,
            full_ssim: full.as_ref().map(|f| ssim(f, &ex.target)).transpose()?,
        };
        on_frame(Frame { report: &report, image: &image, full_image: full.as_ref(), ground_truth: &ex.target })?;
        reports.push(report);
    }
    Ok(reports)
}
