use liveview_tensor::Scalar;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{render_ground_truth, Scene};
use crate::error::{contract, Result};
use crate::geometry::Camera;
use crate::image::Image;

/// Planar arrangements of input cameras on `z = 0`, all looking down +z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RigKind {
    /// Centre plus four cameras at `±b` along x and y.
    Cross5,
    /// 2×2 grid at `(±b, ±b)`.
    Grid4,
    /// 5×2 grid spanning `x ∈ [−b, b]`, `y = ±b/2`.
    Grid10,
}

impl RigKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cross5" => Ok(Self::Cross5),
            "grid4" => Ok(Self::Grid4),
            "grid10" => Ok(Self::Grid10),
            _ => contract(format!("unknown rig {s:?} (expected cross5, grid4 or grid10)")),
        }
    }

    pub fn num_views(self) -> usize {
        match self {
            Self::Cross5 => 5,
            Self::Grid4 => 4,
            Self::Grid10 => 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rig {
    pub kind: RigKind,
    /// Meters.
    pub baseline: f64,
    /// Intrinsics shared by every camera; its pose is ignored.
    pub template: Camera,
}

impl Rig {
    pub fn new(kind: RigKind, baseline: f64, template: Camera) -> Result<Self> {
        if !(baseline > 0.0) {
            return contract("rig baseline must be positive");
        }
        Ok(Self { kind, baseline, template })
    }

    pub fn num_views(&self) -> usize {
        self.kind.num_views()
    }

    pub fn offsets(&self) -> Vec<[f64; 2]> {
        let b = self.baseline;
        match self.kind {
            RigKind::Cross5 => vec![[0.0, 0.0], [-b, 0.0], [b, 0.0], [0.0, -b], [0.0, b]],
            RigKind::Grid4 => vec![[-b, -b], [b, -b], [-b, b], [b, b]],
            RigKind::Grid10 => (0..2)
                .flat_map(|r| (0..5).map(move |c| [-b + c as f64 * b / 2.0, if r == 0 { -b / 2.0 } else { b / 2.0 }]))
                .collect(),
        }
    }

    pub fn camera_at(&self, x: f64, y: f64, z: f64) -> Camera {
        let mut c = self.template.clone();
        c.rotation = nalgebra::Matrix3::identity();
        c.center = Vector3::new(x, y, z);
        c
    }

    pub fn cameras(&self) -> Vec<Camera> {
        self.offsets().iter().map(|o| self.camera_at(o[0], o[1], 0.0)).collect()
    }

    /// Camera at the centroid of the rig.
    pub fn center_camera(&self) -> Camera {
        self.camera_at(0.0, 0.0, 0.0)
    }

    /// Index of the view used as the reference for input-centred MPIs.
    pub fn reference_index(&self) -> usize {
        let offs = self.offsets();
        (0..offs.len())
            .min_by(|&a, &b| {
                let n = |o: [f64; 2]| o[0].hypot(o[1]);
                n(offs[a]).total_cmp(&n(offs[b]))
            })
            .unwrap_or(0)
    }

    /// Whether `(x, y)` lies strictly inside the convex hull of the input
    /// centres, shrunk by `scale ∈ (0, 1]` about the centroid.
    pub fn hull_contains(&self, x: f64, y: f64, scale: f64) -> bool {
        let b = self.baseline * scale;
        match self.kind {
            RigKind::Cross5 => x.abs() + y.abs() < b,
            RigKind::Grid4 => x.abs() < b && y.abs() < b,
            RigKind::Grid10 => x.abs() < b && y.abs() < b / 2.0,
        }
    }

    /// Target camera drawn uniformly from the hull shrunk by `jitter`.
    pub fn sample_target(&self, rng: &mut impl Rng, jitter: f64) -> Camera {
        if jitter <= 0.0 {
            return self.center_camera();
        }
        let b = self.baseline * jitter;
        loop {
            let (x, y) = (rng.gen_range(-b..b), rng.gen_range(-b..b));
            if self.hull_contains(x, y, jitter) {
                return self.camera_at(x, y, 0.0);
            }
        }
    }
}

/// Rendered input views and a target for one training or evaluation step.
#[derive(Clone, Debug)]
pub struct Example<T> {
    pub inputs: Vec<Image<T>>,
    pub cameras: Vec<Camera>,
    pub target: Image<T>,
    pub target_camera: Camera,
}

/// Renders the rig views and a jittered target of `scene`.
pub fn make_example<T: Scalar>(scene: &Scene, rig: &Rig, jitter: f64, seed: u64) -> Example<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target_camera = rig.sample_target(&mut rng, jitter);
    example_for_target(scene, rig, target_camera)
}

/// Like [`make_example`] with an explicit target camera.
pub fn example_for_target<T: Scalar>(scene: &Scene, rig: &Rig, target_camera: Camera) -> Example<T> {
    let cameras = rig.cameras();
    let inputs = cameras.iter().map(|c| render_ground_truth(scene, c)).collect();
    Example {
        inputs,
        target: render_ground_truth(scene, &target_camera),
        cameras,
        target_camera,
    }
}
