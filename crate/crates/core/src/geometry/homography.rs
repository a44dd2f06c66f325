use nalgebra::{Matrix3, Vector3};

use super::Camera;
use crate::error::{contract, Result};

/// Homography taking homogeneous *target* pixels to *source* pixels for the
/// plane `{X : nᵀX = distance}` expressed in the target camera frame.
pub fn homography_for_plane(
    src: &Camera,
    tgt: &Camera,
    normal: Vector3<f64>,
    distance: f64,
) -> Result<Matrix3<f64>> {
    if !(distance > 0.0) {
        return contract(format!("plane distance must be positive, got {distance}"));
    }
    let r_rel = src.rotation.transpose() * tgt.rotation;
    let t_rel = src.rotation.transpose() * (tgt.center - src.center);
    let m = r_rel + t_rel * normal.transpose() / distance;
    let mut h = src.intrinsics() * m * tgt.intrinsics_inverse();
    let scale = h[(2, 2)];
    if scale.abs() > 1e-12 {
        h /= scale;
    }
    Ok(h)
}

/// Backward-warp homography for a plane fronto-parallel to the target
/// camera at depth `z`: `H = K_src (R_rel + t_rel nᵀ / z) K_tgt⁻¹`.
pub fn plane_homography(src: &Camera, tgt: &Camera, z: f64) -> Result<Matrix3<f64>> {
    homography_for_plane(src, tgt, Vector3::z(), z)
}

/// Target-pixel → reference-pixel homography for a plane fronto-parallel to
/// the *reference* camera at depth `z_ref` (used to move an input-centred
/// MPI layer to the target view).
pub fn reference_plane_homography(
    reference: &Camera,
    target: &Camera,
    z_ref: f64,
) -> Result<Matrix3<f64>> {
    if !(z_ref > 0.0) {
        return contract(format!("plane depth must be positive, got {z_ref}"));
    }
    let a = reference.rotation.transpose() * target.rotation;
    let b = reference.rotation.transpose() * (target.center - reference.center);
    let n_ref = Vector3::z();
    let normal = a.transpose() * n_ref;
    let distance = z_ref - n_ref.dot(&b);
    if !(distance > 0.0) {
        return contract("target camera lies on or behind the reference plane");
    }
    homography_for_plane(reference, target, normal, distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector2};

    fn cam(center: Vector3<f64>) -> Camera {
        Camera::centered(64, 48, 55.0, center).unwrap()
    }

    fn apply(h: &Matrix3<f64>, x: f64, y: f64) -> Vector2<f64> {
        let p = h * Vector3::new(x, y, 1.0);
        Vector2::new(p.x / p.z, p.y / p.z)
    }

    #[test]
    fn identical_cameras_give_identity() {
        let mut c = cam(Vector3::new(0.3, -0.2, 0.1));
        c.rotation = *Rotation3::from_euler_angles(0.1, -0.05, 0.2).matrix();
        for z in [0.5, 1.0, 3.7, 100.0] {
            let h = plane_homography(&c, &c, z).unwrap();
            assert!((h - Matrix3::identity()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn horizontal_baseline_shifts_by_focal_times_baseline_over_depth() {
        let tgt = cam(Vector3::zeros());
        let b = 0.12;
        let src = cam(Vector3::new(b, 0.0, 0.0));
        for z in [1.0, 2.5, 9.0] {
            let h = plane_homography(&src, &tgt, z).unwrap();
            let p = apply(&h, 20.0, 13.0);
            assert!((p.x - (20.0 - 55.0 * b / z)).abs() < 1e-9);
            assert!((p.y - 13.0).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_oracle_agrees_with_homography() {
        let tgt = cam(Vector3::new(0.05, 0.02, 0.0));
        let mut src = cam(Vector3::new(-0.1, 0.07, 0.03));
        src.rotation = *Rotation3::from_euler_angles(0.02, 0.03, -0.01).matrix();
        let z = 3.0;
        let h = plane_homography(&src, &tgt, z).unwrap();
        for &(x, y) in &[(0.0, 0.0), (31.5, 23.5), (63.0, 10.0)] {
            // back-project the target pixel onto the plane, project into the source
            let world = tgt.center + tgt.ray(x, y) * z;
            let expected = src.project(&world).unwrap();
            assert!((apply(&h, x, y) - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn inverse_pair_composes_to_identity() {
        let a = cam(Vector3::zeros());
        let b = cam(Vector3::new(0.2, -0.1, 0.0));
        let z = 4.0;
        let ab = plane_homography(&a, &b, z).unwrap();
        let ba = plane_homography(&b, &a, z).unwrap();
        let mut prod = ab * ba;
        prod /= prod[(2, 2)];
        assert!((prod - Matrix3::identity()).abs().max() < 1e-9);
    }

    #[test]
    fn non_positive_depth_is_rejected() {
        let a = cam(Vector3::zeros());
        assert!(plane_homography(&a, &a, 0.0).is_err());
        assert!(plane_homography(&a, &a, -1.0).is_err());
    }

    #[test]
    fn reference_plane_matches_target_plane_for_coplanar_rig() {
        let r = cam(Vector3::zeros());
        let t = cam(Vector3::new(0.1, 0.05, 0.0));
        let a = reference_plane_homography(&r, &t, 2.0).unwrap();
        let b = plane_homography(&r, &t, 2.0).unwrap();
        assert!((a - b).abs().max() < 1e-12);
    }
}
