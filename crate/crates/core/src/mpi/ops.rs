use liveview_tensor::{Scalar, Tensor};

use crate::error::{contract, Result};
use crate::geometry::{reference_plane_homography, Camera, PlaneSet, SamplingMap};
use crate::image::Image;

/// Offset added to camera distances before inverting them (meters).
pub const DISTANCE_EPS: f64 = 1e-4;

/// Per-view factors `1 / (ε + ‖c_v − c_t‖)`.
pub fn inverse_distances(cams: &[Camera], target: &Camera) -> Vec<f64> {
    cams.iter().map(|c| 1.0 / (DISTANCE_EPS + c.distance_to(target))).collect()
}

fn dims4<T: Scalar>(t: &Tensor<T>, what: &str) -> Result<[usize; 4]> {
    match *t.shape() {
        [a, b, c, d] => Ok([a, b, c, d]),
        _ => contract(format!("{what} must be rank 4, got {:?}", t.shape())),
    }
}

/// Scales `D×V×H×W` weights by per-view factors and renormalizes each pixel
/// to sum to one. A pixel whose weights are all zero gets the factors
/// themselves, normalized.
pub fn scale_and_normalize<T: Scalar>(raw: &Tensor<T>, factors: &[f64]) -> Result<Tensor<T>> {
    let [d, v, h, w] = dims4(raw, "raw weights")?;
    if factors.len() != v {
        return contract(format!("{} factors for {v} views", factors.len()));
    }
    let hw = h * w;
    let s: Vec<T> = factors.iter().map(|&f| T::from_f64c(f)).collect();
    let fallback_total: T = s.iter().copied().sum();
    let mut out = vec![T::zero(); raw.len()];
    let src = raw.data();
    for di in 0..d {
        let base = di * v * hw;
        for i in 0..hw {
            let mut total = T::zero();
            for vi in 0..v {
                total = total + src[base + vi * hw + i] * s[vi];
            }
            for vi in 0..v {
                out[base + vi * hw + i] = if total > T::zero() {
                    src[base + vi * hw + i] * s[vi] / total
                } else {
                    s[vi] / fallback_total
                };
            }
        }
    }
    Ok(Tensor::from_vec(raw.shape().to_vec(), out)?)
}

/// `w̃ ∝ raw / (ε + distance)` renormalized over views.
pub fn distance_normalize<T: Scalar>(
    raw: &Tensor<T>,
    cams: &[Camera],
    target: &Camera,
) -> Result<Tensor<T>> {
    if raw.data().iter().any(|&x| !(x >= T::zero())) {
        return contract("raw blending weights must be nonnegative");
    }
    scale_and_normalize(raw, &inverse_distances(cams, target))
}

/// Weighted sum over views of one plane: `V×3×H×W`, `V×H×W` → `3×H×W`.
pub fn blend_plane<T: Scalar>(slice: &[T], weights: &[T], v: usize, hw: usize, out: &mut [T]) {
    out.iter_mut().for_each(|o| *o = T::zero());
    for vi in 0..v {
        let wv = &weights[vi * hw..(vi + 1) * hw];
        for c in 0..3 {
            let src = &slice[(vi * 3 + c) * hw..(vi * 3 + c + 1) * hw];
            let dst = &mut out[c * hw..(c + 1) * hw];
            for i in 0..hw {
                dst[i] = dst[i] + wv[i] * src[i];
            }
        }
    }
}

/// Blends every plane: `D×V×3×H×W`, `D×V×H×W` → `D×3×H×W`.
pub fn blend<T: Scalar>(hwv: &Tensor<T>, weights: &Tensor<T>) -> Result<Tensor<T>> {
    let [d, v, h, w] = dims4(weights, "weights")?;
    if hwv.shape() != [d, v, 3, h, w] {
        return contract(format!(
            "hwv {:?} does not match weights {:?}",
            hwv.shape(),
            weights.shape()
        ));
    }
    let hw = h * w;
    let mut out = vec![T::zero(); d * 3 * hw];
    for di in 0..d {
        blend_plane(
            &hwv.data()[di * v * 3 * hw..(di + 1) * v * 3 * hw],
            &weights.data()[di * v * hw..(di + 1) * v * hw],
            v,
            hw,
            &mut out[di * 3 * hw..(di + 1) * 3 * hw],
        );
    }
    Ok(Tensor::from_vec(vec![d, 3, h, w], out)?)
}

fn composite_dims<T: Scalar>(rgb: &Tensor<T>, alpha: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let [d, c, h, w] = dims4(rgb, "plane colours")?;
    if c != 3 {
        return contract("plane colours must have 3 channels");
    }
    let alpha_ok = alpha.shape() == [d, h, w] || alpha.shape() == [d, 1, h, w];
    if !alpha_ok {
        return contract(format!(
            "alpha {:?} does not match colours {:?}",
            alpha.shape(),
            rgb.shape()
        ));
    }
    Ok((d, h, w))
}

/// Unclamped back-to-front over-composite from a black background.
pub(crate) fn composite_raw<T: Scalar>(rgb: &Tensor<T>, alpha: &Tensor<T>) -> Result<Vec<T>> {
    let (d, h, w) = composite_dims(rgb, alpha)?;
    if alpha.data().iter().any(|&a| !(a >= T::zero() && a <= T::one())) {
        return contract("alpha values must lie in [0, 1]");
    }
    let hw = h * w;
    let mut out = vec![T::zero(); 3 * hw];
    for di in (0..d).rev() {
        let a = &alpha.data()[di * hw..(di + 1) * hw];
        for c in 0..3 {
            let src = &rgb.data()[(di * 3 + c) * hw..(di * 3 + c + 1) * hw];
            let dst = &mut out[c * hw..(c + 1) * hw];
            for i in 0..hw {
                dst[i] = src[i] * a[i] + dst[i] * (T::one() - a[i]);
            }
        }
    }
    Ok(out)
}

/// Over-composites planes stored near→far, iterating far→near from black.
pub fn composite<T: Scalar>(rgb: &Tensor<T>, alpha: &Tensor<T>) -> Result<Image<T>> {
    let (_, h, w) = composite_dims(rgb, alpha)?;
    let out = composite_raw(rgb, alpha)?;
    Ok(Image::new(3, h, w, out)?.clamp01())
}

/// Planes chosen by the depth histogram.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneSelection {
    /// Sorted, unique indices into the parent plane set.
    pub indices: Vec<usize>,
    /// Per-plane count of pixels whose alpha peaks there.
    pub histogram: Vec<usize>,
}

/// Per-pixel argmax-alpha depth histogram; keeps the `k` fullest bins.
/// Ties favour the nearer plane both per pixel and between bins.
pub fn select_planes<T: Scalar>(alpha: &Tensor<T>, k: usize) -> Result<PlaneSelection> {
    let (d, hw) = match *alpha.shape() {
        [d, h, w] | [d, 1, h, w] => (d, h * w),
        _ => return contract(format!("alpha must be D×H×W, got {:?}", alpha.shape())),
    };
    if k == 0 || k > d {
        return contract(format!("k must be in 1..={d}, got {k}"));
    }
    let a = alpha.data();
    let mut histogram = vec![0usize; d];
    for i in 0..hw {
        let mut best = 0;
        for di in 1..d {
            if a[di * hw + i] > a[best * hw + i] {
                best = di;
            }
        }
        histogram[best] += 1;
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| histogram[y].cmp(&histogram[x]).then(x.cmp(&y)));
    let mut indices = order[..k].to_vec();
    indices.sort_unstable();
    Ok(PlaneSelection { indices, histogram })
}

/// Sampling maps that move planes defined at `reference` to `target`.
pub fn reference_to_target_maps(
    reference: &Camera,
    target: &Camera,
    planes: &PlaneSet,
) -> Result<Vec<SamplingMap>> {
    planes
        .depths()
        .iter()
        .map(|&z| {
            let h = reference_plane_homography(reference, target, z)?;
            SamplingMap::from_homography(&h, reference.height, reference.width, target.height, target.width)
        })
        .collect()
}

/// Warps each `D×C×H×W` plane with its own map.
pub fn warp_planes<T: Scalar>(planes: &Tensor<T>, maps: &[SamplingMap]) -> Result<Tensor<T>> {
    let [d, c, h, w] = dims4(planes, "planes")?;
    if maps.len() != d {
        return contract(format!("{} maps for {d} planes", maps.len()));
    }
    let (oh, ow) = maps[0].out_dims();
    if maps.iter().any(|m| m.src_dims() != (h, w) || m.out_dims() != (oh, ow)) {
        return contract("sampling maps do not match the plane dimensions");
    }
    let (hw, ohw) = (h * w, oh * ow);
    let mut out = vec![T::zero(); d * c * ohw];
    for di in 0..d {
        for ci in 0..c {
            let k = di * c + ci;
            maps[di].apply_plane(&planes.data()[k * hw..(k + 1) * hw], &mut out[k * ohw..(k + 1) * ohw]);
        }
    }
    Ok(Tensor::from_vec(vec![d, c, oh, ow], out)?)
}

/// Renders an MPI built at `reference` from `target`: each RGBA plane is
/// warped by its plane homography, then composited.
pub fn render_input_centered<T: Scalar>(
    rgb: &Tensor<T>,
    alpha: &Tensor<T>,
    reference: &Camera,
    target: &Camera,
    planes: &PlaneSet,
) -> Result<Image<T>> {
    let (d, h, w) = composite_dims(rgb, alpha)?;
    if d != planes.len() {
        return contract("plane count does not match the plane set");
    }
    let maps = reference_to_target_maps(reference, target, planes)?;
    let alpha = alpha.clone().reshape(&[d, 1, h, w])?;
    let warped_rgb = warp_planes(rgb, &maps)?;
    let warped_alpha = warp_planes(&alpha, &maps)?;
    composite(&warped_rgb, &warped_alpha)
}
