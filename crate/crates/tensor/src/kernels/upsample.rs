//! Bilinear 2x upsampling with half-pixel centres.
//!
//! Output sample `o` reads source coordinate `(o + 0.5) / 2 - 0.5`, clamped to
//! the first/last row or column at the borders.

use super::{like_input, nchw, tensor_from};
use crate::error::Result;
use crate::{Scalar, Tensor};

#[derive(Clone, Copy)]
struct Tap<T> {
    lo: usize,
    hi: usize,
    frac: T,
}

fn taps<T: Scalar>(src_len: usize) -> Vec<Tap<T>> {
    (0..2 * src_len)
        .map(|o| {
            let s = ((o as f64 + 0.5) / 2.0 - 0.5).max(0.0);
            let lo = (s.floor() as usize).min(src_len - 1);
            let hi = (lo + 1).min(src_len - 1);
            Tap {
                lo,
                hi,
                frac: T::from_f64c(s - lo as f64),
            }
        })
        .collect()
}

pub fn upsample2x<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = nchw("bilinear_upsample2x", x.shape())?;
    let (ty, tx) = (taps::<T>(h), taps::<T>(w));
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![T::zero(); n * c * oh * ow];
    for (plane_idx, src) in x.data().chunks(h * w).enumerate() {
        let dst = &mut out[plane_idx * oh * ow..(plane_idx + 1) * oh * ow];
        for (oy, ry) in ty.iter().enumerate() {
            let (r0, r1) = (&src[ry.lo * w..][..w], &src[ry.hi * w..][..w]);
            for (ox, rx) in tx.iter().enumerate() {
                let top = r0[rx.lo] + (r0[rx.hi] - r0[rx.lo]) * rx.frac;
                let bottom = r1[rx.lo] + (r1[rx.hi] - r1[rx.lo]) * rx.frac;
                dst[oy * ow + ox] = top + (bottom - top) * ry.frac;
            }
        }
    }
    Ok(tensor_from(like_input(x.shape(), n, c, oh, ow), out))
}

pub fn upsample2x_backward<T: Scalar>(
    input_shape: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (n, c, h, w) = nchw("bilinear_upsample2x_backward", input_shape)?;
    let (ty, tx) = (taps::<T>(h), taps::<T>(w));
    let (oh, ow) = (2 * h, 2 * w);
    let mut gx = vec![T::zero(); n * c * h * w];
    for (plane_idx, g) in grad_out.data().chunks(oh * ow).enumerate() {
        let dst = &mut gx[plane_idx * h * w..(plane_idx + 1) * h * w];
        for (oy, ry) in ty.iter().enumerate() {
            for (ox, rx) in tx.iter().enumerate() {
                let v = g[oy * ow + ox];
                let (wy1, wx1) = (ry.frac, rx.frac);
                let (wy0, wx0) = (T::one() - wy1, T::one() - wx1);
                dst[ry.lo * w + rx.lo] = dst[ry.lo * w + rx.lo] + v * wy0 * wx0;
                dst[ry.lo * w + rx.hi] = dst[ry.lo * w + rx.hi] + v * wy0 * wx1;
                dst[ry.hi * w + rx.lo] = dst[ry.hi * w + rx.lo] + v * wy1 * wx0;
                dst[ry.hi * w + rx.hi] = dst[ry.hi * w + rx.hi] + v * wy1 * wx1;
            }
        }
    }
    Ok(tensor_from(input_shape.to_vec(), gx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_replicates() {
        let x = Tensor::<f32>::full(&[1, 1, 1], 0.7);
        let y = upsample2x(&x).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn constant_stays_constant() {
        let x = Tensor::<f32>::full(&[3, 4, 4], -1.25);
        let y = upsample2x(&x).unwrap();
        assert_eq!(y.shape(), &[3, 8, 8]);
        assert!(y.data().iter().all(|&v| v == -1.25));
    }

    #[test]
    fn interior_samples_follow_half_pixel_rule() {
        let x = Tensor::<f64>::from_vec(vec![1, 1, 2], vec![0.0, 4.0]).unwrap();
        let y = upsample2x(&x).unwrap();
        assert_eq!(y.data(), &[0.0, 1.0, 3.0, 4.0, 0.0, 1.0, 3.0, 4.0]);
    }
}
