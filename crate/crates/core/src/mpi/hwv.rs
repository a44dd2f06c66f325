use liveview_tensor::{Scalar, Tensor};
use rayon::prelude::*;

use crate::error::{contract, Result};
use crate::geometry::{plane_homography, Camera, PlaneSet, SamplingMap};
use crate::image::Image;

/// Homography-warped volume: every input view warped to one camera at each
/// depth plane.
#[derive(Clone, Debug)]
pub struct Hwv<T> {
    /// `D×V×3×H×W`.
    pub data: Tensor<T>,
    /// `D×V×H×W`, 1 where the warp sampled inside the source image.
    pub masks: Tensor<T>,
    pub planes: PlaneSet,
    pub camera: Camera,
}

impl<T: Scalar> Hwv<T> {
    pub fn num_planes(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn num_views(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn height(&self) -> usize {
        self.data.shape()[3]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[4]
    }

    /// Plane `d` as a `3V×H×W` network input.
    pub fn plane_input(&self, d: usize) -> Tensor<T> {
        let (v, h, w) = (self.num_views(), self.height(), self.width());
        let n = 3 * v * h * w;
        Tensor::from_vec(vec![3 * v, h, w], self.data.data()[d * n..(d + 1) * n].to_vec())
            .expect("slice sized by construction")
    }

    /// Plane `d` with its near and far neighbours stacked along channels
    /// (`9V×H×W`); missing neighbours at the ends of the stack are zero.
    pub fn plane_input_with_context(&self, d: usize) -> Tensor<T> {
        let (v, h, w) = (self.num_views(), self.height(), self.width());
        let n = 3 * v * h * w;
        let mut data = Vec::with_capacity(3 * n);
        for k in [d as isize - 1, d as isize, d as isize + 1] {
            if k < 0 || k as usize >= self.num_planes() {
                data.extend(std::iter::repeat(T::zero()).take(n));
            } else {
                let k = k as usize;
                data.extend_from_slice(&self.data.data()[k * n..(k + 1) * n]);
            }
        }
        Tensor::from_vec(vec![9 * v, h, w], data).expect("slice sized by construction")
    }

    /// `D×3V×H×W` batch of all plane inputs (no context).
    pub fn batch(&self) -> Tensor<T> {
        let (d, v, h, w) = (self.num_planes(), self.num_views(), self.height(), self.width());
        self.data.clone().reshape(&[d, 3 * v, h, w]).expect("same element count")
    }

    /// `D×9V×H×W` batch with neighbouring-plane context.
    pub fn batch_with_context(&self) -> Tensor<T> {
        let parts: Vec<Tensor<T>> =
            (0..self.num_planes()).map(|d| self.plane_input_with_context(d)).collect();
        Tensor::stack(&parts).expect("uniform plane inputs")
    }
}

fn check_views<T: Scalar>(views: &[Image<T>], cams: &[Camera]) -> Result<(usize, usize)> {
    if views.len() != cams.len() {
        return contract(format!("{} views but {} cameras", views.len(), cams.len()));
    }
    if views.len() < 2 {
        return contract("at least two input views are required");
    }
    let (h, w) = (views[0].height(), views[0].width());
    for (img, cam) in views.iter().zip(cams) {
        if img.channels() != 3 || img.height() != h || img.width() != w {
            return contract("all input views must be 3-channel and share dimensions");
        }
        if (cam.height, cam.width) != (h, w) {
            return contract("camera resolution does not match its image");
        }
    }
    Ok((h, w))
}

/// Warps every view onto each plane of `planes`, fronto-parallel to `target`.
/// Each plane slice depends only on its own depth.
pub fn build_hwv<T: Scalar>(
    views: &[Image<T>],
    cams: &[Camera],
    target: &Camera,
    planes: &PlaneSet,
) -> Result<Hwv<T>> {
    let (sh, sw) = check_views(views, cams)?;
    let (h, w) = (target.height, target.width);
    let v = views.len();
    let hw = h * w;
    let slices: Vec<(Vec<T>, Vec<T>)> = planes
        .depths()
        .par_iter()
        .map(|&z| -> Result<(Vec<T>, Vec<T>)> {
            let mut data = vec![T::zero(); v * 3 * hw];
            let mut masks = vec![T::zero(); v * hw];
            for (vi, (img, cam)) in views.iter().zip(cams).enumerate() {
                let hm = plane_homography(cam, target, z)?;
                let map = SamplingMap::from_homography(&hm, sh, sw, h, w)?;
                for c in 0..3 {
                    let o = (vi * 3 + c) * hw;
                    map.apply_plane(img.plane(c), &mut data[o..o + hw]);
                }
                masks[vi * hw..(vi + 1) * hw].copy_from_slice(&map.mask::<T>());
            }
            Ok((data, masks))
        })
        .collect::<Result<_>>()?;
    let d = planes.len();
    let mut data = Vec::with_capacity(d * v * 3 * hw);
    let mut masks = Vec::with_capacity(d * v * hw);
    for (a, m) in slices {
        data.extend(a);
        masks.extend(m);
    }
    Ok(Hwv {
        data: Tensor::from_vec(vec![d, v, 3, h, w], data)?,
        masks: Tensor::from_vec(vec![d, v, h, w], masks)?,
        planes: planes.clone(),
        camera: target.clone(),
    })
}
