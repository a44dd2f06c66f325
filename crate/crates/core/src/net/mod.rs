//! The per-plane U-Net, its parameter and operation accounting, and
//! checkpoint conversion.

mod accounting;
mod config;
mod layers;
mod model;

pub use accounting::{opx_count, param_count, plane_ops, OpCounting, OpTally};
pub use config::{Centering, HeadMode, NetworkConfig, PlaneContext};
pub use layers::{layer_specs, LayerSpec, KERNEL};
pub use model::{NetOutput, Network, ParamVars, STRIDE_MULTIPLE};
