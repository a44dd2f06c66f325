//! 2-D convolution lowered to im2col + GEMM, one image at a time.
//!
//! Images are processed independently so the result for one batch entry is
//! bit-identical no matter what else is in the batch.

use super::{like_input, nchw, tensor_from};
use crate::error::{shape_err, Result};
use crate::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_height: usize,
    pub out_width: usize,
}

impl ConvGeometry {
    pub fn new(
        input: &[usize],
        weight: &[usize],
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let (batch, in_channels, height, width) = nchw("conv2d", input)?;
        let &[out_channels, w_in, kh, kw] = weight else {
            return shape_err("conv2d", format!("weight must be O×I×k×k, got {weight:?}"));
        };
        if w_in != in_channels {
            return shape_err(
                "conv2d",
                format!("input has {in_channels} channels but weight expects {w_in}"),
            );
        }
        if kh != kw || kh == 0 {
            return shape_err("conv2d", format!("kernel must be square, got {kh}×{kw}"));
        }
        if stride == 0 {
            return shape_err("conv2d", "stride must be positive");
        }
        if height + 2 * padding < kh || width + 2 * padding < kw {
            return shape_err("conv2d", "kernel larger than padded input");
        }
        Ok(Self {
            batch,
            in_channels,
            height,
            width,
            out_channels,
            kernel: kh,
            stride,
            padding,
            out_height: (height + 2 * padding - kh) / stride + 1,
            out_width: (width + 2 * padding - kw) / stride + 1,
        })
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn out_pixels(&self) -> usize {
        self.out_height * self.out_width
    }

    /// Multiply-accumulates for the whole batch.
    pub fn macs(&self) -> u64 {
        (self.batch * self.out_channels * self.out_pixels() * self.patch_len()) as u64
    }
}

/// Output columns `lo..hi` whose tap `kx` lands inside the image row.
fn valid_columns(g: &ConvGeometry, kx: usize) -> (usize, usize) {
    let lo = g.padding.saturating_sub(kx).div_ceil(g.stride);
    let hi = if g.width + g.padding > kx {
        ((g.width + g.padding - kx - 1) / g.stride + 1).min(g.out_width)
    } else {
        0
    };
    (lo.min(hi), hi)
}

fn im2col<T: Scalar>(g: &ConvGeometry, image: &[T], cols: &mut [T]) {
    let p = g.out_pixels();
    let (k, s) = (g.kernel, g.stride);
    for c in 0..g.in_channels {
        let plane = &image[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let (lo, hi) = valid_columns(g, kx);
                let row = &mut cols[((c * k + ky) * k + kx) * p..][..p];
                for oy in 0..g.out_height {
                    let dst = &mut row[oy * g.out_width..(oy + 1) * g.out_width];
                    let iy = (oy * s + ky) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.height as isize || lo >= hi {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    dst[..lo].fill(T::zero());
                    dst[hi..].fill(T::zero());
                    let start = lo * s + kx - g.padding;
                    if s == 1 {
                        dst[lo..hi].copy_from_slice(&src[start..start + hi - lo]);
                    } else {
                        for (d, v) in dst[lo..hi].iter_mut().zip(src[start..].iter().step_by(s)) {
                            *d = *v;
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(g: &ConvGeometry, cols: &[T], image: &mut [T]) {
    let p = g.out_pixels();
    let (k, s) = (g.kernel, g.stride);
    for c in 0..g.in_channels {
        let plane = &mut image[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let (lo, hi) = valid_columns(g, kx);
                if lo >= hi {
                    continue;
                }
                let row = &cols[((c * k + ky) * k + kx) * p..][..p];
                for oy in 0..g.out_height {
                    let iy = (oy * s + ky) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    let src = &row[oy * g.out_width + lo..oy * g.out_width + hi];
                    let start = lo * s + kx - g.padding;
                    if s == 1 {
                        for (d, &v) in dst[start..start + src.len()].iter_mut().zip(src) {
                            *d = *d + v;
                        }
                    } else {
                        for (d, &v) in dst[start..].iter_mut().step_by(s).zip(src) {
                            *d = *d + v;
                        }
                    }
                }
            }
        }
    }
}

pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let g = ConvGeometry::new(input.shape(), weight.shape(), stride, padding)?;
    if let Some(b) = bias {
        if b.shape() != [g.out_channels] {
            return shape_err(
                "conv2d",
                format!("bias must have shape [{}], got {:?}", g.out_channels, b.shape()),
            );
        }
    }
    let in_len = g.in_channels * g.height * g.width;
    let p = g.out_pixels();
    let kk = g.patch_len();
    let out_len = g.out_channels * p;
    let mut out = vec![T::zero(); g.batch * out_len];
    let mut cols = vec![T::zero(); kk * p];
    for n in 0..g.batch {
        im2col(&g, &input.data()[n * in_len..(n + 1) * in_len], &mut cols);
        let dst = &mut out[n * out_len..(n + 1) * out_len];
        T::gemm(
            g.out_channels,
            kk,
            p,
            T::one(),
            weight.data(),
            kk as isize,
            1,
            &cols,
            p as isize,
            1,
            T::zero(),
            dst,
            p as isize,
            1,
        );
        if let Some(b) = bias {
            for (o, &bv) in b.data().iter().enumerate() {
                for v in &mut dst[o * p..(o + 1) * p] {
                    *v = *v + bv;
                }
            }
        }
    }
    Ok(tensor_from(
        like_input(input.shape(), g.batch, g.out_channels, g.out_height, g.out_width),
        out,
    ))
}

pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    padding: usize,
    need_input_grad: bool,
) -> Result<ConvGrads<T>> {
    let g = ConvGeometry::new(input.shape(), weight.shape(), stride, padding)?;
    let in_len = g.in_channels * g.height * g.width;
    let p = g.out_pixels();
    let kk = g.patch_len();
    let out_len = g.out_channels * p;
    if grad_out.len() != g.batch * out_len {
        return shape_err("conv2d_backward", "gradient does not match output shape");
    }
    let mut gw = vec![T::zero(); weight.len()];
    let mut gb = vec![T::zero(); g.out_channels];
    let mut gx = need_input_grad.then(|| vec![T::zero(); input.len()]);
    let mut cols = vec![T::zero(); kk * p];
    let mut gcols = vec![T::zero(); kk * p];
    for n in 0..g.batch {
        let go = &grad_out.data()[n * out_len..(n + 1) * out_len];
        for (o, acc) in gb.iter_mut().enumerate() {
            *acc = *acc + go[o * p..(o + 1) * p].iter().copied().sum::<T>();
        }
        im2col(&g, &input.data()[n * in_len..(n + 1) * in_len], &mut cols);
        // dW (O×kk) += dY (O×P) · colsᵀ (P×kk)
        T::gemm(
            g.out_channels,
            p,
            kk,
            T::one(),
            go,
            p as isize,
            1,
            &cols,
            1,
            p as isize,
            T::one(),
            &mut gw,
            kk as isize,
            1,
        );
        if let Some(gx) = gx.as_mut() {
            // dcols (kk×P) = Wᵀ (kk×O) · dY (O×P)
            T::gemm(
                kk,
                g.out_channels,
                p,
                T::one(),
                weight.data(),
                1,
                kk as isize,
                go,
                p as isize,
                1,
                T::zero(),
                &mut gcols,
                p as isize,
                1,
            );
            col2im(&g, &gcols, &mut gx[n * in_len..(n + 1) * in_len]);
        }
    }
    Ok(ConvGrads {
        input: gx.map(|d| tensor_from(input.shape().to_vec(), d)),
        weight: tensor_from(weight.shape().to_vec(), gw),
        bias: tensor_from(vec![g.out_channels], gb),
    })
}
