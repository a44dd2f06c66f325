use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Pinhole camera with a rigid camera→world pose.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Columns are the camera axes expressed in world coordinates.
    pub rotation: Matrix3<f64>,
    /// Optical centre in world coordinates (meters).
    pub center: Vector3<f64>,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        rotation: Matrix3<f64>,
        center: Vector3<f64>,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return contract(format!("focal lengths must be positive, got {fx}, {fy}"));
        }
        if width < 8 || height < 8 {
            return contract(format!("image must be at least 8×8, got {width}×{height}"));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if ortho > 1e-6 || (det - 1.0).abs() > 1e-6 {
            return contract(format!(
                "rotation is not proper orthonormal (|RᵀR - I| = {ortho:e}, det = {det})"
            ));
        }
        if !center.iter().all(|v| v.is_finite()) {
            return contract("camera centre must be finite");
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            center,
        })
    }

    /// Axis-aligned camera (looking down +z) with a centred principal point.
    pub fn centered(width: usize, height: usize, focal: f64, center: Vector3<f64>) -> Result<Self> {
        Self::new(
            focal,
            focal,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
            Matrix3::identity(),
            center,
        )
    }

    /// Camera at `eye` looking at `target`; `up` is a world direction.
    pub fn look_at(
        template: &Camera,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return contract("look_at target coincides with eye");
        }
        let forward = forward.normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return contract("up vector is parallel to the viewing direction");
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Self::new(
            template.fx,
            template.fy,
            template.cx,
            template.cy,
            template.width,
            template.height,
            rotation,
            eye,
        )
    }

    pub fn with_center(&self, center: Vector3<f64>) -> Self {
        Self {
            center,
            ..self.clone()
        }
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn intrinsics_inverse(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.center)
    }

    /// Pixel coordinates of a world point in front of the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        let c = self.world_to_camera(p);
        (c.z > 0.0).then(|| {
            Vector2::new(
                self.fx * c.x / c.z + self.cx,
                self.fy * c.y / c.z + self.cy,
            )
        })
    }

    /// World-space direction of the ray through pixel `(x, y)`, scaled so its
    /// camera-frame z component is 1.
    pub fn ray(&self, x: f64, y: f64) -> Vector3<f64> {
        self.rotation * Vector3::new((x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0)
    }

    pub fn distance_to(&self, other: &Camera) -> f64 {
        (self.center - other.center).norm()
    }

    pub fn same_intrinsics(&self, other: &Camera) -> bool {
        self.fx == other.fx
            && self.fy == other.fy
            && self.cx == other.cx
            && self.cy == other.cy
            && self.width == other.width
            && self.height == other.height
    }
}

/// One camera in `cameras.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Row-major camera→world rotation.
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    #[serde(rename = "c")]
    pub center: [f64; 3],
}

impl CameraRecord {
    pub fn from_camera(name: Option<String>, cam: &Camera) -> Self {
        let r = &cam.rotation;
        Self {
            name,
            width: cam.width,
            height: cam.height,
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            center: cam.center.into(),
        }
    }

    pub fn to_camera(&self) -> Result<Camera> {
        Camera::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            Matrix3::from_row_slice(&self.rotation),
            Vector3::from(self.center),
        )
    }
}

/// `cameras.json`: named input cameras plus an optional target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraFile {
    pub inputs: Vec<CameraRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<CameraRecord>,
}

impl CameraFile {
    pub fn new(inputs: &[Camera], target: Option<&Camera>) -> Self {
        Self {
            inputs: inputs
                .iter()
                .enumerate()
                .map(|(i, c)| CameraRecord::from_camera(Some(format!("cam{i}")), c))
                .collect(),
            target: target.map(|c| CameraRecord::from_camera(Some("target".into()), c)),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn input_cameras(&self) -> Result<Vec<Camera>> {
        self.inputs.iter().map(CameraRecord::to_camera).collect()
    }

    pub fn target_camera(&self) -> Result<Option<Camera>> {
        self.target.as_ref().map(CameraRecord::to_camera).transpose()
    }
}
