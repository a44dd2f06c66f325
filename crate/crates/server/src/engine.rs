//! Immutable rendering state shared by every session.

use std::path::{Path, PathBuf};
use std::time::Instant;

use liveview_core::geometry::{equidisparity_planes, Camera, PlaneSet};
use liveview_core::net::{opx_count, param_count, Network, OpCounting};
use liveview_core::scene::{example_for_target, generate_scene, Rig, Scene};
use liveview_core::synth::{Rendering, Synthesizer};
use liveview_core::train::{held_out_seed, TrainConfig};
use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Result, ServerError};
use crate::protocol::PoseMessage;

/// Where the scene comes from.
#[derive(Clone, Debug)]
pub enum SceneSource {
    File(PathBuf),
    Procedural(u64),
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub checkpoint: PathBuf,
    /// Scene setup; defaults to `train_config.json` beside the checkpoint.
    pub setup: Option<PathBuf>,
    pub scene: SceneSource,
    /// Full plane count D.
    pub planes: usize,
}

/// Axis-aligned box target centres are clamped to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Hull {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Hull {
    /// The rig's bounding box grown by half a baseline in x and y, and one
    /// baseline either side of the rig plane in z.
    pub fn around(rig: &Rig) -> Self {
        let offs = rig.offsets();
        let pad = rig.baseline / 2.0;
        let (mut min, mut max) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for o in &offs {
            for a in 0..2 {
                min[a] = min[a].min(o[a] - pad);
                max[a] = max[a].max(o[a] + pad);
            }
        }
        min[2] = -rig.baseline;
        max[2] = rig.baseline;
        Self { min, max }
    }

    pub fn clamp(&self, p: [f64; 3]) -> ([f64; 3], bool) {
        let q: [f64; 3] = std::array::from_fn(|i| p[i].clamp(self.min[i], self.max[i]));
        (q, q != p)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SceneInfo {
    pub id: String,
    pub quads: usize,
    pub depths: Vec<f64>,
    pub z_near: f64,
    pub z_far: f64,
}

/// Body of `GET /info`.
#[derive(Clone, Debug, Serialize)]
pub struct Info {
    #[serde(rename = "V")]
    pub views: usize,
    #[serde(rename = "D")]
    pub planes: usize,
    #[serde(rename = "K")]
    pub selected: usize,
    pub width: usize,
    pub height: usize,
    pub param_count: usize,
    pub opx: f64,
    pub checkpoint: String,
    pub head_mode: String,
    pub centering: String,
    pub plane_context: String,
    pub trained_planes: usize,
    pub plane_depths: Vec<f64>,
    pub hull: Hull,
    pub scene: SceneInfo,
}

/// A rendered frame ready for the wire.
pub struct RenderedFrame {
    pub rendering: Rendering<f32>,
    pub render_ms: f64,
}

pub struct Engine {
    pub synth: Synthesizer<f32>,
    pub setup: TrainConfig,
    pub rig: Rig,
    pub planes: PlaneSet,
    pub hull: Hull,
    pub scene: Scene,
    pub scene_id: String,
    pub checkpoint_id: String,
}

fn display_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

impl Engine {
    pub fn load(config: &EngineConfig) -> Result<Self> {
        let net = Network::<f32>::load(&config.checkpoint)?;
        let sibling = config.checkpoint.parent().map(|d| d.join("train_config.json")).filter(|p| p.exists());
        let mut setup: TrainConfig = match config.setup.clone().or(sibling) {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => TrainConfig::default(),
        };
        setup.head_mode = net.config().head_mode;
        setup.centering = net.config().centering;
        setup.context = net.config().context;
        if net.trained_planes() > 0 {
            setup.planes = net.trained_planes();
        }
        let (scene, scene_id) = match &config.scene {
            SceneSource::File(p) => (Scene::load(p)?, display_name(p)),
            SceneSource::Procedural(seed) => (
                generate_scene(held_out_seed(*seed, 0), &setup.scene_config()?),
                format!("procedural-{seed}"),
            ),
        };
        Self::new(net, setup, scene, scene_id, display_name(&config.checkpoint), config.planes)
    }

    pub fn new(
        net: Network<f32>,
        setup: TrainConfig,
        scene: Scene,
        scene_id: String,
        checkpoint_id: String,
        planes: usize,
    ) -> Result<Self> {
        let rig = setup.rig()?;
        if rig.num_views() != net.config().num_views {
            return Err(ServerError::Config(format!(
                "checkpoint expects {} views but the rig has {}",
                net.config().num_views,
                rig.num_views()
            )));
        }
        let cameras = rig.cameras();
        let views = example_for_target::<f32>(&scene, &rig, rig.center_camera()).inputs;
        let synth = Synthesizer::new(net, views, cameras, rig.reference_index())?;
        Ok(Self {
            synth,
            planes: equidisparity_planes(setup.z_near, setup.z_far, planes)?,
            hull: Hull::around(&rig),
            rig,
            setup,
            scene,
            scene_id,
            checkpoint_id,
        })
    }

    pub fn views(&self) -> usize {
        self.synth.cameras().len()
    }

    pub fn width(&self) -> usize {
        self.setup.width
    }

    pub fn height(&self) -> usize {
        self.setup.height
    }

    pub fn info(&self, selected: usize) -> Info {
        let net = self.synth.network();
        let nc = net.config();
        Info {
            views: nc.num_views,
            planes: self.planes.len(),
            selected,
            width: self.width(),
            height: self.height(),
            param_count: param_count(nc),
            opx: opx_count(nc, self.planes.len(), self.height(), self.width(), OpCounting::default()),
            checkpoint: self.checkpoint_id.clone(),
            head_mode: format!("{:?}", nc.head_mode),
            centering: format!("{:?}", nc.centering),
            plane_context: format!("{:?}", nc.context),
            trained_planes: net.trained_planes(),
            plane_depths: self.planes.depths().to_vec(),
            hull: self.hull,
            scene: SceneInfo {
                id: self.scene_id.clone(),
                quads: self.scene.quads.len(),
                depths: self.scene.depths(),
                z_near: self.scene.z_near,
                z_far: self.scene.z_far,
            },
        }
    }

    /// Target camera for a pose, clamped into the hull; the viewing
    /// direction is kept when the centre moves.
    pub fn camera_for(&self, pose: &PoseMessage) -> Result<(Camera, bool)> {
        let (c, clamped) = self.hull.clamp(pose.c);
        let template = self.rig.center_camera();
        let camera = match pose.look_at {
            None => template.with_center(c.into()),
            Some(target) => {
                let up = pose.up.unwrap_or([0.0, -1.0, 0.0]);
                let dir = Vector3::from(target) - Vector3::from(pose.c);
                Camera::look_at(&template, c.into(), Vector3::from(c) + dir, up.into())?
            }
        };
        Ok((camera, clamped))
    }

    pub fn render(&self, camera: &Camera, planes: &PlaneSet) -> Result<RenderedFrame> {
        let started = Instant::now();
        let rendering = self.synth.render(camera, planes)?;
        let render_ms = started.elapsed().as_secs_f64() * 1e3;
        Ok(RenderedFrame { rendering, render_ms })
    }
}
