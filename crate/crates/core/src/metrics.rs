//! PSNR and SSIM on `[0, 1]` images.

use liveview_tensor::Scalar;

use crate::error::{contract, Result};
use crate::image::Image;

pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<()> {
    if !a.same_dims(b) {
        return contract(format!("image dims differ: {:?} vs {:?}", a.dims(), b.dims()));
    }
    Ok(())
}

pub fn mse<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    check(a, b)?;
    let n = a.data().len().max(1) as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x.to_f64c() - y.to_f64c()).powi(2))
        .sum::<f64>()
        / n)
}

/// `10·log10(1 / MSE)`, capped when the images are (nearly) identical.
pub fn psnr<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    let m = mse(a, b)?;
    if m < 1e-10 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / m).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable valid-mode filtering of an `h×w` plane.
fn filter_valid(src: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|i| g[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| g[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over the valid window positions, averaged over channels.
pub fn ssim<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    check(a, b)?;
    let (c, h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return contract(format!("SSIM needs at least {SSIM_WINDOW}×{SSIM_WINDOW} pixels"));
    }
    let g = gaussian_window();
    let (c1, c2) = (SSIM_K1 * SSIM_K1, SSIM_K2 * SSIM_K2);
    let mut total = 0.0;
    for ch in 0..c {
        let x: Vec<f64> = a.plane(ch).iter().map(|v| v.to_f64c()).collect();
        let y: Vec<f64> = b.plane(ch).iter().map(|v| v.to_f64c()).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let (mx, my) = (filter_valid(&x, h, w, &g), filter_valid(&y, h, w, &g));
        let (sxx, syy, sxy) = (
            filter_valid(&xx, h, w, &g),
            filter_valid(&yy, h, w, &g),
            filter_valid(&xy, h, w, &g),
        );
        let n = mx.len() as f64;
        let mut acc = 0.0;
        for i in 0..mx.len() {
            let (vx, vy, cov) = (sxx[i] - mx[i] * mx[i], syy[i] - my[i] * my[i], sxy[i] - mx[i] * my[i]);
            acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2))
                / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += acc / n;
    }
    Ok(total / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64, c: usize, h: usize, w: usize) -> Image<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::new(c, h, w, (0..c * h * w).map(|_| rng.gen()).collect()).unwrap()
    }

    /// Direct per-window SSIM with an explicit 2-D kernel.
    fn ssim_reference(a: &Image<f64>, b: &Image<f64>) -> f64 {
        let r = 5i64;
        let mut k2 = [[0.0; 11]; 11];
        let mut s = 0.0;
        for i in -r..=r {
            for j in -r..=r {
                let v = (-((i * i + j * j) as f64) / (2.0 * 1.5 * 1.5)).exp();
                k2[(i + r) as usize][(j + r) as usize] = v;
                s += v;
            }
        }
        let (c, h, w) = a.dims();
        let mut total = 0.0;
        for ch in 0..c {
            let mut acc = 0.0;
            let mut count = 0.0;
            for y in 5..h - 5 {
                for x in 5..w - 5 {
                    let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for i in 0..11 {
                        for j in 0..11 {
                            let g = k2[i][j] / s;
                            let p = a.get(ch, y + i - 5, x + j - 5);
                            let q = b.get(ch, y + i - 5, x + j - 5);
                            mx += g * p;
                            my += g * q;
                            xx += g * p * p;
                            yy += g * q * q;
                            xy += g * p * q;
                        }
                    }
                    let (c1, c2) = (1e-4, 9e-4);
                    acc += (2.0 * mx * my + c1) * (2.0 * (xy - mx * my) + c2)
                        / ((mx * mx + my * my + c1) * (xx - mx * mx + yy - my * my + c2));
                    count += 1.0;
                }
            }
            total += acc / count;
        }
        total / c as f64
    }

    #[test]
    fn identical_images() {
        let a = random(1, 3, 16, 20);
        assert_eq!(psnr(&a, &a).unwrap(), 100.0);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn black_versus_white_is_zero_db() {
        let a = Image::filled(3, 12, 12, 0.0f64);
        let b = Image::filled(3, 12, 12, 1.0f64);
        assert_eq!(psnr(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn matches_the_direct_formula() {
        let (a, b) = (random(2, 3, 17, 23), random(3, 3, 17, 23));
        let m: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.data().len() as f64;
        assert!((psnr(&a, &b).unwrap() - 10.0 * (1.0 / m).log10()).abs() < 1e-9);
        assert!((ssim(&a, &b).unwrap() - ssim_reference(&a, &b)).abs() < 1e-6);
    }

    #[test]
    fn more_noise_means_lower_psnr() {
        let a = random(4, 3, 24, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise: Vec<f64> = (0..a.data().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut last = f64::INFINITY;
        for amp in [0.01, 0.02, 0.05, 0.1, 0.2] {
            let d: Vec<f64> = a.data().iter().zip(&noise).map(|(v, n)| v + amp * n).collect();
            let b = Image::new(3, 24, 24, d).unwrap();
            let p = psnr(&a, &b).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(psnr(&random(1, 3, 12, 12), &random(1, 3, 12, 13)).is_err());
        assert!(ssim(&random(1, 3, 8, 8), &random(1, 3, 8, 8)).is_err());
    }
}
