//! Homography-warped volumes, blending-weight normalization, compositing,
//! dynamic plane selection and the input-centred rendering path.

pub mod diff;
mod dump;
mod hwv;
mod ops;

pub use dump::{load_mpi_dump, save_mpi_dump, PlanesFile};
pub use hwv::{build_hwv, Hwv};
pub use ops::{
    blend, blend_plane, composite, distance_normalize, inverse_distances, reference_to_target_maps,
    render_input_centered, scale_and_normalize, select_planes, warp_planes, PlaneSelection,
    DISTANCE_EPS,
};
