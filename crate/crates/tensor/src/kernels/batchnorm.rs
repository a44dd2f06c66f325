use super::{nchw, tensor_from};
use crate::error::{shape_err, Result};
use crate::{Scalar, Tensor};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize by batch statistics and fold them into the running stats.
    Train,
    /// Normalize by the running stats.
    Eval,
}

/// Running mean and (unbiased) variance per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormStats<T> {
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
}

impl<T: Scalar> BatchNormStats<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::ones(&[channels]),
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    fn update(&mut self, mean: &[T], unbiased_var: &[T]) {
        let m = T::from_f64c(BN_MOMENTUM);
        let keep = T::one() - m;
        for (r, &v) in self.running_mean.data_mut().iter_mut().zip(mean) {
            *r = keep * *r + m * v;
        }
        for (r, &v) in self.running_var.data_mut().iter_mut().zip(unbiased_var) {
            *r = keep * *r + m * v;
        }
    }
}

/// Forward result plus what the backward pass needs.
pub struct BnSaved<T> {
    pub output: Tensor<T>,
    pub normalized: Tensor<T>,
    pub inv_std: Vec<T>,
    pub mode: BnMode,
}

fn per_channel<T: Scalar>(
    x: &[T],
    n: usize,
    c: usize,
    hw: usize,
    mut f: impl FnMut(usize, &[T]),
) {
    for b in 0..n {
        for ch in 0..c {
            f(ch, &x[(b * c + ch) * hw..(b * c + ch + 1) * hw]);
        }
    }
}

pub fn batchnorm2d_forward<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    stats: &mut BatchNormStats<T>,
    mode: BnMode,
) -> Result<BnSaved<T>> {
    let (n, c, h, w) = nchw("batchnorm2d", input.shape())?;
    if gamma.shape() != [c] || beta.shape() != [c] || stats.channels() != c {
        return shape_err("batchnorm2d", format!("expected {c} channel parameters"));
    }
    let hw = h * w;
    let count = n * hw;
    let eps = T::from_f64c(BN_EPS);
    let x = input.data();
    let (mean, var) = match mode {
        BnMode::Train => {
            let mut sum = vec![0.0f64; c];
            per_channel(x, n, c, hw, |ch, s| {
                sum[ch] += s.iter().map(|v| v.to_f64c()).sum::<f64>()
            });
            let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
            let mut sq = vec![0.0f64; c];
            per_channel(x, n, c, hw, |ch, s| {
                sq[ch] += s
                    .iter()
                    .map(|v| (v.to_f64c() - mean[ch]).powi(2))
                    .sum::<f64>()
            });
            let var: Vec<f64> = sq.iter().map(|s| s / count as f64).collect();
            let unbiased: Vec<T> = sq
                .iter()
                .map(|s| T::from_f64c(s / (count.max(2) - 1) as f64))
                .collect();
            let mean_t: Vec<T> = mean.iter().map(|&v| T::from_f64c(v)).collect();
            stats.update(&mean_t, &unbiased);
            (mean_t, var.iter().map(|&v| T::from_f64c(v)).collect::<Vec<T>>())
        }
        BnMode::Eval => (
            stats.running_mean.data().to_vec(),
            stats.running_var.data().to_vec(),
        ),
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut normalized = vec![T::zero(); x.len()];
    let mut out = vec![T::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            let range = (b * c + ch) * hw..(b * c + ch + 1) * hw;
            let (g, bt, mu, is) = (gamma.data()[ch], beta.data()[ch], mean[ch], inv_std[ch]);
            for i in range {
                let xh = (x[i] - mu) * is;
                normalized[i] = xh;
                out[i] = g * xh + bt;
            }
        }
    }
    Ok(BnSaved {
        output: tensor_from(input.shape().to_vec(), out),
        normalized: tensor_from(input.shape().to_vec(), normalized),
        inv_std,
        mode,
    })
}

/// Returns `(d input, d gamma, d beta)`.
pub fn batchnorm2d_backward<T: Scalar>(
    saved: &BnSaved<T>,
    gamma: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let shape = saved.normalized.shape();
    let (n, c, h, w) = nchw("batchnorm2d_backward", shape)?;
    let hw = h * w;
    let count = T::from_usize(n * hw).unwrap();
    let dy = grad_out.data();
    let xh = saved.normalized.data();
    let mut sum_dy = vec![T::zero(); c];
    let mut sum_dy_xh = vec![T::zero(); c];
    for b in 0..n {
        for ch in 0..c {
            for i in (b * c + ch) * hw..(b * c + ch + 1) * hw {
                sum_dy[ch] = sum_dy[ch] + dy[i];
                sum_dy_xh[ch] = sum_dy_xh[ch] + dy[i] * xh[i];
            }
        }
    }
    let mut dx = vec![T::zero(); dy.len()];
    for b in 0..n {
        for ch in 0..c {
            let g = gamma.data()[ch];
            let is = saved.inv_std[ch];
            for i in (b * c + ch) * hw..(b * c + ch + 1) * hw {
                dx[i] = match saved.mode {
                    BnMode::Train => {
                        g * is / count * (count * dy[i] - sum_dy[ch] - xh[i] * sum_dy_xh[ch])
                    }
                    BnMode::Eval => g * is * dy[i],
                };
            }
        }
    }
    Ok((
        tensor_from(shape.to_vec(), dx),
        tensor_from(vec![c], sum_dy_xh),
        tensor_from(vec![c], sum_dy),
    ))
}
