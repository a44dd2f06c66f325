//! Frame-by-frame scene animation for video rendering.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Scene;
use crate::error::{contract, Result};

/// Target position at a keyframe; positions in between are linear.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathKey {
    pub frame: usize,
    /// World position in meters.
    pub position: [f64; 3],
}

/// Constant-velocity motion of one quad (index 0 is the backdrop).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadMotion {
    pub quad: usize,
    /// Meters per frame in world x and y.
    pub velocity: [f64; 2],
}

/// JSON description of a video: a base scene, a target path and optional
/// quad motions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneScript {
    pub frames: usize,
    /// Procedural scene seed; ignored when `scene_path` is set.
    #[serde(default)]
    pub scene_seed: u64,
    /// Scene directory or `scene.json`, relative to the script.
    #[serde(default)]
    pub scene_path: Option<PathBuf>,
    #[serde(default)]
    pub target_path: Vec<PathKey>,
    #[serde(default)]
    pub motions: Vec<QuadMotion>,
}

impl SceneScript {
    pub fn parse(text: &str) -> Result<Self> {
        let script: Self = serde_json::from_str(text)?;
        script.validate()?;
        Ok(script)
    }

    /// Loads a script, resolving `scene_path` against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut script = Self::parse(&std::fs::read_to_string(path)?)?;
        if let (Some(p), Some(dir)) = (&script.scene_path, path.parent()) {
            if p.is_relative() {
                script.scene_path = Some(dir.join(p));
            }
        }
        Ok(script)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_path.windows(2).any(|w| w[0].frame >= w[1].frame) {
            return contract("target_path keyframes must have increasing frame numbers");
        }
        if self.target_path.iter().flat_map(|k| k.position).any(|v| !v.is_finite()) {
            return contract("target_path positions must be finite");
        }
        Ok(())
    }

    pub fn is_static(&self) -> bool {
        self.motions.iter().all(|m| m.velocity == [0.0, 0.0])
    }

    /// Interpolated target position; held constant outside the keyframes.
    pub fn target_position(&self, frame: usize) -> [f64; 3] {
        let keys = &self.target_path;
        match keys.iter().position(|k| k.frame >= frame) {
            None => keys.last().map_or([0.0; 3], |k| k.position),
            Some(0) => keys[0].position,
            Some(i) => {
                let (a, b) = (&keys[i - 1], &keys[i]);
                let t = (frame - a.frame) as f64 / (b.frame - a.frame) as f64;
                std::array::from_fn(|j| a.position[j] + t * (b.position[j] - a.position[j]))
            }
        }
    }

    /// `base` with every motion applied for `frame` frames.
    pub fn scene_at(&self, base: &Scene, frame: usize) -> Result<Scene> {
        let mut scene = base.clone();
        for m in &self.motions {
            let Some(q) = scene.quads.get_mut(m.quad) else {
                return contract(format!("motion refers to quad {} of {}", m.quad, base.quads.len()));
            };
            q.offset[0] += m.velocity[0] * frame as f64;
            q.offset[1] += m.velocity[1] * frame as f64;
        }
        Ok(scene)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script(json: &str) -> Result<SceneScript> {
        SceneScript::parse(json)
    }

    #[test]
    fn path_interpolates_and_holds() {
        let s = script(
            r#"{"frames": 10, "target_path": [
                {"frame": 2, "position": [0.0, 0.0, 0.0]},
                {"frame": 6, "position": [0.4, -0.2, 0.0]}]}"#,
        )
        .unwrap();
        assert_eq!(s.target_position(0), [0.0, 0.0, 0.0]);
        let mid = s.target_position(4);
        assert!((mid[0] - 0.2).abs() < 1e-12 && (mid[1] + 0.1).abs() < 1e-12);
        assert_eq!(s.target_position(9), [0.4, -0.2, 0.0]);
        assert!(s.is_static());
    }

    #[test]
    fn malformed_scripts_are_rejected() {
        assert!(script("{").is_err());
        assert!(script(r#"{"frames": 3, "unknown": 1}"#).is_err());
        assert!(script(
            r#"{"frames": 3, "target_path": [
                {"frame": 2, "position": [0,0,0]}, {"frame": 2, "position": [1,0,0]}]}"#
        )
        .is_err());
    }

    #[test]
    fn zero_frames_is_valid() {
        assert_eq!(script(r#"{"frames": 0}"#).unwrap().frames, 0);
    }
}
