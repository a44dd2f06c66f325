//! Dynamic target-centred multi-plane image (MPI) view synthesis.

pub mod error;
pub mod eval;
pub mod geometry;
pub mod image;
pub mod metrics;
pub mod mpi;
pub mod net;
pub mod scene;
pub mod synth;
pub mod train;
pub mod video;

pub use error::{Error, Result};

pub type Image32 = image::Image<f32>;
pub type Image64 = image::Image<f64>;
pub type Network32 = net::Network<f32>;
pub type Network64 = net::Network<f64>;
pub type Hwv32 = mpi::Hwv<f32>;
pub type Hwv64 = mpi::Hwv<f64>;
pub type Synthesizer32 = synth::Synthesizer<f32>;
pub type Synthesizer64 = synth::Synthesizer<f64>;
pub type Trainer32 = train::Trainer<f32>;
pub type Trainer64 = train::Trainer<f64>;
