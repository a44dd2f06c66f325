//! Reflect padding on the bottom/right edges and the matching crop.

use super::{like_input, nchw, tensor_from};
use crate::error::{shape_err, Result};
use crate::{Scalar, Tensor};

fn reflect(i: usize, len: usize) -> usize {
    if i < len {
        i
    } else {
        2 * (len - 1) - i
    }
}

/// Pads `extra_h` rows at the bottom and `extra_w` columns at the right by
/// mirroring (edge pixel not repeated).
pub fn reflect_pad<T: Scalar>(x: &Tensor<T>, extra_h: usize, extra_w: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = nchw("reflect_pad", x.shape())?;
    if extra_h >= h.max(1) || extra_w >= w.max(1) {
        return shape_err("reflect_pad", "reflect padding must be smaller than the input");
    }
    let (oh, ow) = (h + extra_h, w + extra_w);
    let mut out = vec![T::zero(); n * c * oh * ow];
    for (p, src) in x.data().chunks(h * w).enumerate() {
        let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
        for oy in 0..oh {
            let sy = reflect(oy, h);
            for ox in 0..ow {
                dst[oy * ow + ox] = src[sy * w + reflect(ox, w)];
            }
        }
    }
    Ok(tensor_from(like_input(x.shape(), n, c, oh, ow), out))
}

pub fn reflect_pad_backward<T: Scalar>(
    input_shape: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (n, c, h, w) = nchw("reflect_pad_backward", input_shape)?;
    let (_, _, oh, ow) = nchw("reflect_pad_backward", grad_out.shape())?;
    let mut gx = vec![T::zero(); n * c * h * w];
    for (p, g) in grad_out.data().chunks(oh * ow).enumerate() {
        let dst = &mut gx[p * h * w..(p + 1) * h * w];
        for oy in 0..oh {
            let sy = reflect(oy, h);
            for ox in 0..ow {
                let i = sy * w + reflect(ox, w);
                dst[i] = dst[i] + g[oy * ow + ox];
            }
        }
    }
    Ok(tensor_from(input_shape.to_vec(), gx))
}

/// Keeps the top-left `height×width` window.
pub fn crop<T: Scalar>(x: &Tensor<T>, height: usize, width: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = nchw("crop", x.shape())?;
    if height > h || width > w {
        return shape_err("crop", format!("cannot crop {h}×{w} to {height}×{width}"));
    }
    let mut out = Vec::with_capacity(n * c * height * width);
    for src in x.data().chunks(h * w) {
        for y in 0..height {
            out.extend_from_slice(&src[y * w..y * w + width]);
        }
    }
    Ok(tensor_from(like_input(x.shape(), n, c, height, width), out))
}

pub fn crop_backward<T: Scalar>(input_shape: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = nchw("crop_backward", input_shape)?;
    let (_, _, height, width) = nchw("crop_backward", grad_out.shape())?;
    let mut gx = vec![T::zero(); n * c * h * w];
    for (p, g) in grad_out.data().chunks(height * width).enumerate() {
        for y in 0..height {
            gx[p * h * w + y * w..][..width].copy_from_slice(&g[y * width..(y + 1) * width]);
        }
    }
    Ok(tensor_from(input_shape.to_vec(), gx))
}
