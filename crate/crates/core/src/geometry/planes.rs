use crate::error::{contract, Result};

/// Depth planes in the MPI camera frame, ordered near → far.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneSet {
    depths: Vec<f64>,
}

impl PlaneSet {
    pub fn from_depths(depths: Vec<f64>) -> Result<Self> {
        if depths.is_empty() {
            return contract("a plane set needs at least one depth");
        }
        if depths.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return contract("plane depths must be finite and positive");
        }
        if depths.windows(2).any(|w| !(w[0] < w[1])) {
            return contract("plane depths must be strictly increasing (near to far)");
        }
        Ok(Self { depths })
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    pub fn disparities(&self) -> Vec<f64> {
        self.depths.iter().map(|z| 1.0 / z).collect()
    }

    pub fn near(&self) -> f64 {
        self.depths[0]
    }

    pub fn far(&self) -> f64 {
        self.depths[self.depths.len() - 1]
    }

    /// Planes at the given (sorted, unique) indices.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.iter().any(|&i| i >= self.depths.len()) {
            return contract("plane index out of range");
        }
        Self::from_depths(indices.iter().map(|&i| self.depths[i]).collect())
    }
}

/// `count` planes whose disparities are evenly spaced from `1/z_near` to
/// `1/z_far` inclusive. A single plane sits at the disparity midpoint.
pub fn equidisparity_planes(z_near: f64, z_far: f64, count: usize) -> Result<PlaneSet> {
    if !(z_near > 0.0 && z_near < z_far && z_far.is_finite()) {
        return contract(format!("need 0 < z_near < z_far, got {z_near}, {z_far}"));
    }
    if count == 0 {
        return contract("plane count must be at least 1");
    }
    let (d_max, d_min) = (1.0 / z_near, 1.0 / z_far);
    let depths = if count == 1 {
        vec![2.0 / (d_max + d_min)]
    } else {
        let step = (d_max - d_min) / (count - 1) as f64;
        (0..count)
            .map(|i| {
                if i == 0 {
                    z_near
                } else if i == count - 1 {
                    z_far
                } else {
                    1.0 / (d_max - step * i as f64)
                }
            })
            .collect()
    };
    PlaneSet::from_depths(depths)
}
