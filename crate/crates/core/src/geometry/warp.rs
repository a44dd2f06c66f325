use liveview_tensor::Scalar;
use nalgebra::{Matrix3, Vector3};

use crate::error::{contract, Result};
use crate::image::Image;

const SNAP: f64 = 1e-9;

/// Bilinear taps for every output pixel of a backward warp. Pixels whose
/// sample falls outside the source rectangle have no taps.
#[derive(Clone, Debug)]
pub struct SamplingMap {
    out_height: usize,
    out_width: usize,
    src_height: usize,
    src_width: usize,
    taps: Vec<Option<Taps>>,
}

/// Four source indices (row-major within a channel) and their weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Taps {
    pub index: [usize; 4],
    pub weight: [f64; 4],
}

/// Result of [`warp_image`].
#[derive(Clone, Debug)]
pub struct Warped<T> {
    pub image: Image<T>,
    /// Single-channel, 1 where the sample was in bounds and 0 elsewhere.
    pub mask: Image<T>,
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}

impl SamplingMap {
    /// Output pixel `p` samples the source at `h · p`.
    pub fn from_homography(
        h: &Matrix3<f64>,
        src_height: usize,
        src_width: usize,
        out_height: usize,
        out_width: usize,
    ) -> Result<Self> {
        let scale = h.abs().max();
        if !(scale.is_finite() && scale > 0.0) || h.determinant().abs() <= 1e-12 * scale.powi(3) {
            return contract("degenerate homography (rank < 3)");
        }
        let (max_x, max_y) = ((src_width - 1) as f64, (src_height - 1) as f64);
        let mut taps = Vec::with_capacity(out_height * out_width);
        for y in 0..out_height {
            for x in 0..out_width {
                let p = h * Vector3::new(x as f64, y as f64, 1.0);
                if !(p.z > 0.0) {
                    taps.push(None);
                    continue;
                }
                let u = snap(p.x / p.z);
                let v = snap(p.y / p.z);
                if !(u >= 0.0 && v >= 0.0 && u <= max_x && v <= max_y) {
                    taps.push(None);
                    continue;
                }
                let (x0, y0) = (u.floor() as usize, v.floor() as usize);
                let (x1, y1) = ((x0 + 1).min(src_width - 1), (y0 + 1).min(src_height - 1));
                let (fx, fy) = (u - x0 as f64, v - y0 as f64);
                taps.push(Some(Taps {
                    index: [
                        y0 * src_width + x0,
                        y0 * src_width + x1,
                        y1 * src_width + x0,
                        y1 * src_width + x1,
                    ],
                    weight: [
                        (1.0 - fx) * (1.0 - fy),
                        fx * (1.0 - fy),
                        (1.0 - fx) * fy,
                        fx * fy,
                    ],
                }));
            }
        }
        Ok(Self {
            out_height,
            out_width,
            src_height,
            src_width,
            taps,
        })
    }

    pub fn out_dims(&self) -> (usize, usize) {
        (self.out_height, self.out_width)
    }

    pub fn src_dims(&self) -> (usize, usize) {
        (self.src_height, self.src_width)
    }

    pub fn taps(&self) -> &[Option<Taps>] {
        &self.taps
    }

    /// Warp one channel plane into `out` (length `out_height·out_width`).
    pub fn apply_plane<T: Scalar>(&self, src: &[T], out: &mut [T]) {
        debug_assert_eq!(src.len(), self.src_height * self.src_width);
        debug_assert_eq!(out.len(), self.taps.len());
        for (o, t) in out.iter_mut().zip(&self.taps) {
            *o = match t {
                None => T::zero(),
                Some(t) => {
                    let mut acc = 0.0;
                    for k in 0..4 {
                        if t.weight[k] != 0.0 {
                            acc += t.weight[k] * src[t.index[k]].to_f64().unwrap_or(0.0);
                        }
                    }
                    T::from_f64(acc).unwrap_or_else(T::zero)
                }
            };
        }
    }

    /// Scatter an output-plane gradient back onto the source plane.
    pub fn accumulate_adjoint<T: Scalar>(&self, grad_out: &[T], grad_src: &mut [T]) {
        for (g, t) in grad_out.iter().zip(&self.taps) {
            if let Some(t) = t {
                for k in 0..4 {
                    if t.weight[k] != 0.0 {
                        grad_src[t.index[k]] =
                            grad_src[t.index[k]] + *g * T::from_f64(t.weight[k]).unwrap();
                    }
                }
            }
        }
    }

    pub fn mask<T: Scalar>(&self) -> Vec<T> {
        self.taps
            .iter()
            .map(|t| if t.is_some() { T::one() } else { T::zero() })
            .collect()
    }

    pub fn apply<T: Scalar>(&self, src: &Image<T>) -> Result<Warped<T>> {
        if (src.height(), src.width()) != (self.src_height, self.src_width) {
            return contract("source image does not match the sampling map");
        }
        let plane = self.out_height * self.out_width;
        let mut data = vec![T::zero(); src.channels() * plane];
        for (c, out) in data.chunks_mut(plane).enumerate() {
            self.apply_plane(src.plane(c), out);
        }
        Ok(Warped {
            image: Image::new(src.channels(), self.out_height, self.out_width, data)?,
            mask: Image::new(1, self.out_height, self.out_width, self.mask())?,
        })
    }
}

/// Backward bilinear warp: output pixel `p` takes the source sample at
/// `h · p`; out-of-bounds samples are 0 with mask 0.
pub fn warp_image<T: Scalar>(
    src: &Image<T>,
    h: &Matrix3<f64>,
    out_height: usize,
    out_width: usize,
) -> Result<Warped<T>> {
    SamplingMap::from_homography(h, src.height(), src.width(), out_height, out_width)?.apply(src)
}
