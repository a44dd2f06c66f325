//! Projective machinery: pinhole cameras, plane-induced homographies,
//! bilinear backward warping and equi-disparity plane sets.
//!
//! Conventions used everywhere (training, serving, tests):
//! * camera frame is x right, y down, z forward;
//! * pixel centres sit at integer coordinates, and the principal point uses
//!   the same convention (`cx = (width - 1) / 2` for a centred camera);
//! * world units are meters and disparity is inverse depth in 1/m.

mod camera;
mod homography;
mod planes;
mod warp;

pub use camera::{Camera, CameraFile, CameraRecord};
pub use homography::{homography_for_plane, plane_homography, reference_plane_homography};
pub use planes::{equidisparity_planes, PlaneSet};
pub use warp::{warp_image, SamplingMap, Warped};
