//! Minimal dense tensors with tape-based reverse-mode automatic differentiation.
//!
//! The crate covers exactly what a small convolutional U-Net needs to be
//! trained and evaluated on the CPU: 2-D convolution, batch normalization,
//! pointwise activations, channel softmax, bilinear 2x upsampling, a handful
//! of elementwise and structural ops, the Adam optimizer and a flat binary
//! checkpoint container.
//!
//! Everything is generic over [`Scalar`] (`f32` for training and inference,
//! `f64` for finite-difference gradient checks).
//!
//! ```
//! use liveview_tensor::{Tape, Tensor};
//!
//! let mut tape = Tape::<f64>::new();
//! let x = tape.leaf(Tensor::from_vec(vec![2], vec![1.0, 2.0]).unwrap(), true);
//! let sq = tape.mul(x, x).unwrap();
//! let loss = tape.sum(sq);
//! tape.backward(loss).unwrap();
//! assert_eq!(tape.grad(x).unwrap().data(), &[2.0, 4.0]);
//! ```

pub mod adam;
pub mod checkpoint;
mod error;
pub mod gradcheck;
pub mod kernels;
mod scalar;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{Checkpoint, CheckpointHeader, ParamRecord};
pub use error::{Result, TensorError};
pub use kernels::batchnorm::{BatchNormStats, BnMode, BN_EPS, BN_MOMENTUM};
pub use scalar::Scalar;
pub use tape::{CustomOp, Tape, Var};
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Tape32 = Tape<f32>;
pub type Tape64 = Tape<f64>;
