//! Forward and backward kernels on plain tensors.
//!
//! The [`Tape`](crate::Tape) records calls to these; inference paths call
//! them directly without recording anything.

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod pad;
pub mod upsample;

use crate::error::{shape_err, Result};
use crate::Scalar;
use crate::Tensor;

/// Interprets a rank-3 `C×H×W` or rank-4 `N×C×H×W` shape as `(N, C, H, W)`.
pub(crate) fn nchw(op: &'static str, shape: &[usize]) -> Result<(usize, usize, usize, usize)> {
    match *shape {
        [c, h, w] => Ok((1, c, h, w)),
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => shape_err(op, format!("expected C×H×W or N×C×H×W, got {shape:?}")),
    }
}

/// Output shape with the same rank convention as the input.
pub(crate) fn like_input(input: &[usize], n: usize, c: usize, h: usize, w: usize) -> Vec<usize> {
    if input.len() == 3 {
        vec![c, h, w]
    } else {
        vec![n, c, h, w]
    }
}

pub(crate) fn tensor_from<T: Scalar>(shape: Vec<usize>, data: Vec<T>) -> Tensor<T> {
    Tensor::from_vec(shape, data).expect("kernel produced consistent shape")
}
