//! Parsing of poses, plane lists and input view sets.

use std::path::Path;

use liveview_core::geometry::{equidisparity_planes, Camera, CameraFile, PlaneSet};
use liveview_core::image::Image;
use liveview_core::scene::{render_ground_truth, Scene};
use liveview_core::train::TrainConfig;
use serde::Deserialize;

use crate::error::{usage, Result};

/// `x,y,z` in meters.
pub fn parse_pose(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad coordinate {p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok([x, y, z]),
        _ => Err(format!("pose must be three finite numbers x,y,z, got {s:?}")),
    }
}

#[derive(Deserialize)]
struct DepthList {
    depths: Vec<f64>,
}

/// Plane depths from a JSON file with a `depths` array (a `planes.json`
/// dump qualifies).
pub fn load_plane_file(path: &Path) -> Result<PlaneSet> {
    let list: DepthList = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(PlaneSet::from_depths(list.depths)?)
}

pub fn uniform_planes(setup: &TrainConfig, count: usize) -> Result<PlaneSet> {
    Ok(equidisparity_planes(setup.z_near, setup.z_far, count)?)
}

/// Input views with their cameras and, when known, the ground-truth
/// renderer for arbitrary targets.
pub struct ViewSet {
    pub views: Vec<Image<f32>>,
    pub cameras: Vec<Camera>,
    pub scene: Option<Scene>,
    /// Target camera stored alongside the inputs, if any.
    pub target: Option<Camera>,
}

impl ViewSet {
    /// Rig views rendered from a scene directory or `scene.json`.
    pub fn from_scene(path: &Path, setup: &TrainConfig) -> Result<Self> {
        let scene = Scene::load(path)?;
        let cameras = setup.rig()?.cameras();
        let views = cameras.iter().map(|c| render_ground_truth(&scene, c)).collect();
        Ok(Self { views, cameras, scene: Some(scene), target: None })
    }

    /// PNG inputs paired in order with the cameras of `cameras.json`.
    pub fn from_files(images: &[std::path::PathBuf], cameras: &Path) -> Result<Self> {
        for p in images.iter().map(|p| p.as_path()).chain([cameras]) {
            if !p.is_file() {
                return usage(format!("cannot read {}", p.display()));
            }
        }
        let file = CameraFile::load(cameras)?;
        let cams = file.input_cameras()?;
        if cams.len() != images.len() {
            return usage(format!("{} images but {} cameras in {}", images.len(), cams.len(), cameras.display()));
        }
        let mut views = Vec::with_capacity(images.len());
        for (p, c) in images.iter().zip(&cams) {
            let img = Image::<f32>::load_png(p)?;
            if (img.width(), img.height()) != (c.width, c.height) {
                return usage(format!(
                    "{} is {}×{} but its camera is {}×{}",
                    p.display(),
                    img.width(),
                    img.height(),
                    c.width,
                    c.height
                ));
            }
            views.push(img);
        }
        Ok(Self { views, cameras: cams, scene: None, target: file.target_camera()? })
    }

    /// Camera with the first input's intrinsics and rotation at `pose`.
    pub fn camera_at(&self, pose: [f64; 3]) -> Camera {
        self.cameras[0].with_center(pose.into())
    }

    pub fn ground_truth(&self, target: &Camera) -> Option<Image<f32>> {
        self.scene.as_ref().map(|s| render_ground_truth(s, target))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poses_parse_strictly() {
        assert_eq!(parse_pose("0.1, -2,3").unwrap(), [0.1, -2.0, 3.0]);
        assert!(parse_pose("1,2").is_err());
        assert!(parse_pose("1,2,x").is_err());
        assert!(parse_pose("1,2,inf").is_err());
    }
}
