use liveview_tensor::Scalar;

use super::Scene;
use crate::geometry::Camera;
use crate::image::Image;

const SNAP: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}

fn sample(tex: &Image<f32>, u: f64, v: f64, out: &mut [f64; 3]) {
    let (w, h) = (tex.width(), tex.height());
    let u = snap(u).clamp(0.0, (w - 1) as f64);
    let v = snap(v).clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (u.floor() as usize, v.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (u - x0 as f64, v - y0 as f64);
    for (c, o) in out.iter_mut().enumerate() {
        let at = |x, y| tex.get(c, y, x) as f64;
        let mut acc = (1.0 - fx) * (1.0 - fy) * at(x0, y0);
        if fx > 0.0 {
            acc += fx * (1.0 - fy) * at(x1, y0);
        }
        if fy > 0.0 {
            acc += (1.0 - fx) * fy * at(x0, y1);
            if fx > 0.0 {
                acc += fx * fy * at(x1, y1);
            }
        }
        *o = acc;
    }
}

/// Exact image of `scene` from `cam`: each pixel ray takes the bilinear
/// texture sample of the nearest quad it hits (equivalent to painting quads
/// far to near), or the background colour.
pub fn render_ground_truth<T: Scalar>(scene: &Scene, cam: &Camera) -> Image<T> {
    let mut order: Vec<usize> = (0..scene.quads.len()).collect();
    order.sort_by(|&a, &b| scene.quads[a].depth.total_cmp(&scene.quads[b].depth));
    let (h, w) = (cam.height, cam.width);
    let mut data = vec![T::zero(); 3 * h * w];
    let mut px = [0.0; 3];
    for y in 0..h {
        for x in 0..w {
            let ray = cam.ray(x as f64, y as f64);
            let mut colour = scene.background;
            for &qi in &order {
                let q = &scene.quads[qi];
                if ray.z.abs() < 1e-12 {
                    continue;
                }
                let t = (q.depth - cam.center.z) / ray.z;
                if t <= 0.0 {
                    continue;
                }
                let p = cam.center + ray * t;
                if let Some((u, v)) = q.texel(p.x, p.y) {
                    sample(&q.texture, u, v, &mut px);
                    colour = px;
                    break;
                }
            }
            for c in 0..3 {
                data[(c * h + y) * w + x] = T::from_f64c(colour[c]);
            }
        }
    }
    Image::new(3, h, w, data).expect("buffer sized for camera")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::plane_homography;
    use crate::geometry::warp_image;
    use crate::scene::{random_texture, Quad};
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn full_frame_quad(cam: &Camera, depth: f64, texture: Image<f32>) -> Quad {
        let ex = cam.width as f64 * depth / cam.fx;
        let ey = cam.height as f64 * depth / cam.fy;
        let left = (-0.5 - cam.cx) * depth / cam.fx;
        let top = (-0.5 - cam.cy) * depth / cam.fy;
        Quad {
            texture,
            depth,
            extent: [ex, ey],
            offset: [left + ex / 2.0, top + ey / 2.0],
        }
    }

    #[test]
    fn canonical_camera_sees_the_texture_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cam = Camera::centered(24, 16, 20.0, Vector3::zeros()).unwrap();
        let tex = random_texture(&mut rng, 16, 24);
        let scene = Scene::new(vec![full_frame_quad(&cam, 3.0, tex.clone())], [0.0; 3], 1.0, 10.0).unwrap();
        let img: Image<f32> = render_ground_truth(&scene, &cam);
        assert_eq!(img, tex);
    }

    #[test]
    fn near_quad_occludes_far_quad() {
        let cam = Camera::centered(16, 16, 16.0, Vector3::zeros()).unwrap();
        let red = Image::from_fn(3, 8, 8, |c, _, _| if c == 0 { 1.0f32 } else { 0.0 });
        let blue = Image::from_fn(3, 8, 8, |c, _, _| if c == 2 { 1.0f32 } else { 0.0 });
        let far = full_frame_quad(&cam, 8.0, blue);
        let near = Quad { texture: red, depth: 2.0, extent: [0.5, 0.5], offset: [0.0, 0.0] };
        let scene = Scene::new(vec![far, near], [0.0; 3], 1.0, 10.0).unwrap();
        let img: Image<f64> = render_ground_truth(&scene, &cam);
        assert_eq!(img.get(0, 8, 8), 1.0);
        assert_eq!(img.get(2, 8, 8), 0.0);
        assert_eq!(img.get(2, 0, 0), 1.0);
    }

    #[test]
    fn translation_shifts_by_disparity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cam = Camera::centered(32, 32, 30.0, Vector3::zeros()).unwrap();
        let depth = 3.0;
        let q = Quad { texture: random_texture(&mut rng, 40, 40), depth, extent: [2.0, 2.0], offset: [0.0, 0.0] };
        let scene = Scene::new(vec![q], [0.0; 3], 1.0, 10.0).unwrap();
        // shift of exactly one pixel: b = z / f
        let b = depth / 30.0;
        let a: Image<f64> = render_ground_truth(&scene, &cam);
        let moved: Image<f64> = render_ground_truth(&scene, &cam.with_center(Vector3::new(b, 0.0, 0.0)));
        for y in 4..28 {
            for x in 4..27 {
                for c in 0..3 {
                    assert!((moved.get(c, y, x) - a.get(c, y, x + 1)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn views_of_one_plane_are_related_by_its_homography() {
        let cam = Camera::centered(48, 48, 48.0, Vector3::zeros()).unwrap();
        let depth = 4.0;
        // band-limited texture: bilinear resampling is near-exact on it
        let smooth = Image::from_fn(3, 64, 64, |c, y, x| {
            let (u, v) = (x as f32 / 32.0, y as f32 / 32.0);
            0.5 + 0.35 * ((u * 6.283 + c as f32).sin() * (v * 6.283).cos())
        });
        let q = Quad { texture: smooth, depth, extent: [8.0, 8.0], offset: [0.0, 0.0] };
        let scene = Scene::new(vec![q], [0.0; 3], 1.0, 10.0).unwrap();
        let other = cam.with_center(Vector3::new(0.13, -0.07, 0.0));
        let src: Image<f64> = render_ground_truth(&scene, &cam);
        let dst: Image<f64> = render_ground_truth(&scene, &other);
        let h = plane_homography(&cam, &other, depth).unwrap();
        let warped = warp_image(&src, &h, 48, 48).unwrap();
        let mut worst: f64 = 0.0;
        for y in 2..46 {
            for x in 2..46 {
                if warped.mask.get(0, y, x) == 1.0 {
                    for c in 0..3 {
                        worst = worst.max((warped.image.get(c, y, x) - dst.get(c, y, x)).abs());
                    }
                }
            }
        }
        assert!(worst < 2.0 / 255.0, "{worst}");
    }
}
