//! Procedural worlds of textured fronto-parallel quads with an exact
//! renderer, plus the camera rigs used to sample training examples.

mod generate;
mod render;
mod rig;
mod script;
mod texture;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::image::Image;

pub use generate::{generate_scene, generate_scene_with_depths, SceneConfig};
pub use render::render_ground_truth;
pub use rig::{example_for_target, make_example, Example, Rig, RigKind};
pub use script::{PathKey, QuadMotion, SceneScript};
pub use texture::{random_texture, texture_std, MIN_TEXTURE_STD};

/// A textured rectangle on the plane `z = depth`, axis aligned in x and y.
#[derive(Clone, Debug, PartialEq)]
pub struct Quad {
    pub texture: Image<f32>,
    /// Meters along the world z axis.
    pub depth: f64,
    /// Width and height in meters.
    pub extent: [f64; 2],
    /// World x and y of the quad centre.
    pub offset: [f64; 2],
}

impl Quad {
    /// Texel coordinates of the world point `(x, y)` on the quad, or `None`
    /// when it falls outside. Texel centres sit at integer coordinates and
    /// the quad edge is half a texel beyond the outermost centres.
    pub fn texel(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let left = self.offset[0] - self.extent[0] / 2.0;
        let top = self.offset[1] - self.extent[1] / 2.0;
        let (fu, fv) = ((x - left) / self.extent[0], (y - top) / self.extent[1]);
        if !(0.0..=1.0).contains(&fu) || !(0.0..=1.0).contains(&fv) {
            return None;
        }
        Some((
            fu * self.texture.width() as f64 - 0.5,
            fv * self.texture.height() as f64 - 0.5,
        ))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub quads: Vec<Quad>,
    /// Colour of rays that hit nothing.
    pub background: [f64; 3],
    pub z_near: f64,
    pub z_far: f64,
}

#[derive(Serialize, Deserialize)]
struct QuadRecord {
    texture: String,
    depth: f64,
    extent: [f64; 2],
    offset: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct SceneRecord {
    z_near: f64,
    z_far: f64,
    background: [f64; 3],
    quads: Vec<QuadRecord>,
}

impl Scene {
    pub fn new(quads: Vec<Quad>, background: [f64; 3], z_near: f64, z_far: f64) -> Result<Self> {
        if !(z_near > 0.0 && z_near < z_far) {
            return contract(format!("need 0 < z_near < z_far, got {z_near}, {z_far}"));
        }
        for q in &quads {
            if !(q.depth >= z_near && q.depth <= z_far) {
                return contract(format!("quad depth {} outside [{z_near}, {z_far}]", q.depth));
            }
            if !(q.extent[0] > 0.0 && q.extent[1] > 0.0) {
                return contract("quad extent must be positive");
            }
            if q.texture.channels() != 3 || q.texture.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return contract("quad textures must be RGB in [0, 1]");
            }
        }
        Ok(Self { quads, background, z_near, z_far })
    }

    /// Distinct quad depths, near to far.
    pub fn depths(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.quads.iter().map(|q| q.depth).collect();
        d.sort_by(|a, b| a.total_cmp(b));
        d.dedup();
        d
    }

    /// Writes `scene.json` and one PNG per quad texture into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut quads = Vec::new();
        for (i, q) in self.quads.iter().enumerate() {
            let name = format!("texture_{i:02}.png");
            q.texture.save_png(dir.join(&name))?;
            quads.push(QuadRecord {
                texture: name,
                depth: q.depth,
                extent: q.extent,
                offset: q.offset,
            });
        }
        let rec = SceneRecord {
            z_near: self.z_near,
            z_far: self.z_far,
            background: self.background,
            quads,
        };
        std::fs::write(dir.join("scene.json"), serde_json::to_string_pretty(&rec)?)?;
        Ok(())
    }

    /// Reads `scene.json`; texture paths are relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (json, dir) = if path.is_dir() {
            (path.join("scene.json"), path.to_path_buf())
        } else {
            (path.to_path_buf(), path.parent().unwrap_or(Path::new(".")).to_path_buf())
        };
        let rec: SceneRecord = serde_json::from_str(&std::fs::read_to_string(&json)?)?;
        let quads = rec
            .quads
            .into_iter()
            .map(|q| {
                Ok(Quad {
                    texture: Image::load_png(dir.join(&q.texture))?,
                    depth: q.depth,
                    extent: q.extent,
                    offset: q.offset,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(quads, rec.background, rec.z_near, rec.z_far)
    }
}
