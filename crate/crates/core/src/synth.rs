//! End-to-end view synthesis with a trained network in any of the four
//! centring/context modes.

use liveview_tensor::{Scalar, Tensor};

use crate::error::{contract, Result};
use crate::geometry::{Camera, PlaneSet};
use crate::image::Image;
use crate::mpi::{
    blend, build_hwv, composite, distance_normalize, render_input_centered, Hwv,
};
use crate::net::{Centering, Network, PlaneContext};

/// A rendered view together with the MPI that produced it.
#[derive(Clone, Debug)]
pub struct Rendering<T> {
    pub image: Image<T>,
    /// `D×3×H×W` blended plane colours at the MPI camera.
    pub rgb: Tensor<T>,
    /// `D×H×W` plane alphas at the MPI camera.
    pub alpha: Tensor<T>,
    /// `D×V×H×W` normalized blending weights.
    pub weights: Tensor<T>,
    pub planes: PlaneSet,
    /// Camera the planes are fronto-parallel to.
    pub mpi_camera: Camera,
}

/// Input views and cameras bound to a network.
#[derive(Clone, Debug)]
pub struct Synthesizer<T> {
    net: Network<T>,
    views: Vec<Image<T>>,
    cameras: Vec<Camera>,
    reference: usize,
}

/// Stacks the network inputs of every plane for the given context mode.
pub fn network_batch<T: Scalar>(hwv: &Hwv<T>, context: PlaneContext) -> Tensor<T> {
    match context {
        PlaneContext::Dynamic => hwv.batch(),
        PlaneContext::Static => hwv.batch_with_context(),
    }
}

impl<T: Scalar> Synthesizer<T> {
    /// `reference` is the view input-centred MPIs are built at.
    pub fn new(net: Network<T>, views: Vec<Image<T>>, cameras: Vec<Camera>, reference: usize) -> Result<Self> {
        if views.len() != net.config().num_views || cameras.len() != views.len() {
            return contract(format!(
                "network expects {} views, got {} images and {} cameras",
                net.config().num_views,
                views.len(),
                cameras.len()
            ));
        }
        if reference >= views.len() {
            return contract("reference view index out of range");
        }
        Ok(Self { net, views, cameras, reference })
    }

    pub fn network(&self) -> &Network<T> {
        &self.net
    }

    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }

    pub fn views(&self) -> &[Image<T>] {
        &self.views
    }

    /// Camera the MPI is built at when rendering `target`.
    pub fn mpi_camera(&self, target: &Camera) -> Camera {
        match self.net.config().centering {
            Centering::Target => target.clone(),
            Centering::Input => self.cameras[self.reference].clone(),
        }
    }

    pub fn render(&self, target: &Camera, planes: &PlaneSet) -> Result<Rendering<T>> {
        let config = *self.net.config();
        let mpi_camera = self.mpi_camera(target);
        let hwv = build_hwv(&self.views, &self.cameras, &mpi_camera, planes)?;
        let out = self.net.forward_par(&network_batch(&hwv, config.context))?;
        let (d, h, w) = (planes.len(), mpi_camera.height, mpi_camera.width);
        let weights = match config.centering {
            Centering::Target => distance_normalize(&out.weights, &self.cameras, target)?,
            Centering::Input => out.weights,
        };
        let rgb = blend(&hwv.data, &weights)?;
        let alpha = out.alpha.reshape(&[d, h, w])?;
        let image = match config.centering {
            Centering::Target => composite(&rgb, &alpha)?,
            Centering::Input => render_input_centered(&rgb, &alpha, &mpi_camera, target, planes)?,
        };
        Ok(Rendering { image, rgb, alpha, weights, planes: planes.clone(), mpi_camera })
    }
}

/// Index of the input camera closest to `target`.
pub fn nearest_view(cameras: &[Camera], target: &Camera) -> usize {
    (0..cameras.len())
        .min_by(|&a, &b| cameras[a].distance_to(target).total_cmp(&cameras[b].distance_to(target)))
        .unwrap_or(0)
}
