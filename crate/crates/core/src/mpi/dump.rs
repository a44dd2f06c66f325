use std::path::Path;

use liveview_tensor::{Scalar, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::geometry::PlaneSet;
use crate::image::Image;

/// `planes.json` written next to the per-plane PNGs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanesFile {
    pub width: usize,
    pub height: usize,
    /// Near to far, meters.
    pub depths: Vec<f64>,
    pub rgb: Vec<String>,
    pub alpha: Vec<String>,
}

/// Writes `plane_NN_rgb.png` (8-bit), `plane_NN_alpha.png` (16-bit gray)
/// and `planes.json` into `dir`.
pub fn save_mpi_dump<T: Scalar>(
    dir: impl AsRef<Path>,
    rgb: &Tensor<T>,
    alpha: &Tensor<T>,
    planes: &PlaneSet,
) -> Result<PlanesFile> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let [d, 3, h, w] = rgb.shape()[..] else {
        return contract("plane colours must be D×3×H×W");
    };
    if alpha.len() != d * h * w || planes.len() != d {
        return contract("alpha or plane set does not match the colour planes");
    }
    let mut file = PlanesFile {
        width: w,
        height: h,
        depths: planes.depths().to_vec(),
        rgb: Vec::new(),
        alpha: Vec::new(),
    };
    for di in 0..d {
        let colour = Image::new(3, h, w, rgb.data()[di * 3 * h * w..(di + 1) * 3 * h * w].to_vec())?;
        let a = Image::new(1, h, w, alpha.data()[di * h * w..(di + 1) * h * w].to_vec())?;
        let (rn, an) = (format!("plane_{di:02}_rgb.png"), format!("plane_{di:02}_alpha.png"));
        colour.save_png(dir.join(&rn))?;
        a.save_png16_gray(dir.join(&an))?;
        file.rgb.push(rn);
        file.alpha.push(an);
    }
    std::fs::write(dir.join("planes.json"), serde_json::to_string_pretty(&file)?)?;
    Ok(file)
}

/// Reads a dump back as (`D×3×H×W` colours, `D×H×W` alpha, planes).
pub fn load_mpi_dump<T: Scalar>(dir: impl AsRef<Path>) -> Result<(Tensor<T>, Tensor<T>, PlaneSet)> {
    let dir = dir.as_ref();
    let file: PlanesFile = serde_json::from_str(&std::fs::read_to_string(dir.join("planes.json"))?)?;
    let d = file.depths.len();
    if file.rgb.len() != d || file.alpha.len() != d {
        return contract("planes.json lists a different number of images than depths");
    }
    let (h, w) = (file.height, file.width);
    let mut rgb = Vec::with_capacity(d * 3 * h * w);
    let mut alpha = Vec::with_capacity(d * h * w);
    for (rn, an) in file.rgb.iter().zip(&file.alpha) {
        let c = Image::<T>::load_png(dir.join(rn))?;
        let a = Image::<T>::load_png16_gray(dir.join(an))?;
        if (c.height(), c.width()) != (h, w) || (a.height(), a.width()) != (h, w) {
            return contract("plane image has unexpected dimensions");
        }
        rgb.extend_from_slice(c.data());
        alpha.extend_from_slice(a.data());
    }
    Ok((
        Tensor::from_vec(vec![d, 3, h, w], rgb)?,
        Tensor::from_vec(vec![d, h, w], alpha)?,
        PlaneSet::from_depths(file.depths)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rgb = Tensor::from_vec(vec![2, 3, 2, 2], (0..24).map(|i| i as f64 / 23.0).collect()).unwrap();
        let alpha = Tensor::from_vec(vec![2, 2, 2], (0..8).map(|i| i as f64 / 7.0).collect()).unwrap();
        let planes = PlaneSet::from_depths(vec![1.5, 4.0]).unwrap();
        save_mpi_dump(dir.path(), &rgb, &alpha, &planes).unwrap();
        let (r, a, p) = load_mpi_dump::<f64>(dir.path()).unwrap();
        assert_eq!(p, planes);
        assert!(r.max_abs_diff(&rgb).unwrap() <= 0.5 / 255.0 + 1e-12);
        assert!(a.max_abs_diff(&alpha).unwrap() <= 0.5 / 65535.0 + 1e-12);
    }
}
