use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{random_texture, Quad, Scene};
use crate::geometry::Camera;

/// Parameters of the procedural scene distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub z_near: f64,
    pub z_far: f64,
    /// Total quads including the backdrop.
    pub min_quads: usize,
    pub max_quads: usize,
    /// Image width and height and focal length the scene is framed for.
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    /// Largest camera offset from the origin the backdrop must cover.
    pub rig_extent: f64,
}

pub const MIN_TEXTURE_SIZE: usize = 16;
pub const MAX_TEXTURE_SIZE: usize = 192;

impl SceneConfig {
    pub fn default_for(camera: &Camera, rig_extent: f64) -> Self {
        Self {
            z_near: 2.0,
            z_far: 20.0,
            min_quads: 1,
            max_quads: 8,
            width: camera.width,
            height: camera.height,
            focal: camera.fx,
            rig_extent,
        }
    }

    fn texture_size(&self, extent: f64, depth: f64) -> usize {
        ((extent * self.focal / depth).round() as usize).clamp(MIN_TEXTURE_SIZE, MAX_TEXTURE_SIZE)
    }

    fn backdrop(&self, rng: &mut ChaCha8Rng, depth: f64) -> Quad {
        let margin = 1.3;
        let ex = (self.width as f64 * depth / self.focal + 2.0 * self.rig_extent) * margin;
        let ey = (self.height as f64 * depth / self.focal + 2.0 * self.rig_extent) * margin;
        let texture = random_texture(rng, self.texture_size(ey, depth), self.texture_size(ex, depth));
        Quad { texture, depth, extent: [ex, ey], offset: [0.0, 0.0] }
    }

    fn foreground(&self, rng: &mut ChaCha8Rng, depth: f64) -> Quad {
        let (w, h) = (self.width as f64, self.height as f64);
        let u = rng.gen_range(0.1 * w..0.9 * w) - (w - 1.0) / 2.0;
        let v = rng.gen_range(0.1 * h..0.9 * h) - (h - 1.0) / 2.0;
        let frustum = w * depth / self.focal;
        let ex = frustum * rng.gen_range(0.15..0.55);
        let ey = ex * rng.gen_range(0.6..1.6);
        let texture = random_texture(rng, self.texture_size(ey, depth), self.texture_size(ex, depth));
        Quad {
            texture,
            depth,
            extent: [ex, ey],
            offset: [u * depth / self.focal, v * depth / self.focal],
        }
    }
}

/// A backdrop at `z_far` plus foreground quads at depths uniform in
/// disparity. Identical seeds give identical scenes.
pub fn generate_scene(seed: u64, config: &SceneConfig) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(config.min_quads.max(1)..=config.max_quads.max(config.min_quads.max(1)));
    let (d_min, d_max) = (1.0 / config.z_far, 1.0 / config.z_near);
    let mut quads = vec![config.backdrop(&mut rng, config.z_far)];
    for _ in 1..n {
        let depth = (1.0 / rng.gen_range(d_min..=d_max)).clamp(config.z_near, config.z_far);
        quads.push(config.foreground(&mut rng, depth));
    }
    Scene::new(quads, [0.0; 3], config.z_near, config.z_far).expect("depths drawn inside the range")
}

/// Quads at exactly the given depths: the farthest becomes the backdrop.
pub fn generate_scene_with_depths(seed: u64, config: &SceneConfig, depths: &[f64]) -> crate::Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sorted = depths.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let Some((&far, rest)) = sorted.split_first() else {
        return crate::error::contract("at least one depth is required");
    };
    let mut quads = vec![config.backdrop(&mut rng, far)];
    for &d in rest {
        quads.push(config.foreground(&mut rng, d));
    }
    Scene::new(quads, [0.0; 3], config.z_near, config.z_far)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::render_ground_truth;
    use nalgebra::Vector3;

    fn config() -> SceneConfig {
        SceneConfig::default_for(&Camera::centered(48, 48, 48.0, Vector3::zeros()).unwrap(), 0.15)
    }

    #[test]
    fn same_seed_same_scene() {
        assert_eq!(generate_scene(7, &config()), generate_scene(7, &config()));
        assert_ne!(generate_scene(7, &config()), generate_scene(8, &config()));
    }

    #[test]
    fn depths_and_counts_respect_the_config() {
        let c = config();
        for seed in 0..100 {
            let s = generate_scene(seed, &c);
            assert!((1..=8).contains(&s.quads.len()));
            assert!(s.quads.iter().all(|q| q.depth >= c.z_near && q.depth <= c.z_far));
            assert_eq!(s.quads[0].depth, c.z_far);
        }
    }

    #[test]
    fn explicit_depths_are_used_verbatim() {
        let s = generate_scene_with_depths(3, &config(), &[4.0, 11.0]).unwrap();
        assert_eq!(s.depths(), vec![4.0, 11.0]);
        let single = generate_scene_with_depths(3, &config(), &[6.5]).unwrap();
        assert_eq!(single.depths(), vec![6.5]);
    }

    #[test]
    fn backdrop_covers_every_rig_view() {
        let c = config();
        let s = generate_scene_with_depths(1, &c, &[c.z_far]).unwrap();
        let mut s = s;
        s.background = [2.0, 2.0, 2.0];
        for (x, y) in [(0.15, 0.0), (-0.15, 0.0), (0.0, 0.15), (0.0, -0.15)] {
            let cam = Camera::centered(48, 48, 48.0, Vector3::new(x, y, 0.0)).unwrap();
            let img: crate::image::Image<f64> = render_ground_truth(&s, &cam);
            assert!(img.data().iter().all(|&v| v <= 1.0));
        }
    }
}
