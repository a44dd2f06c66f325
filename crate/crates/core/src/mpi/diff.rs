//! Tape ops for the rendering stages so the composited image can be
//! differentiated back to the network outputs.

use liveview_tensor::{CustomOp, Scalar, Tape, Tensor, TensorError, Var};

use super::ops::{blend, composite_raw, scale_and_normalize, warp_planes};
use crate::error::Result;
use crate::geometry::SamplingMap;

type OpResult<T> = liveview_tensor::Result<Vec<Option<Tensor<T>>>>;

fn op_err(e: crate::Error) -> TensorError {
    TensorError::Contract(e.to_string())
}

struct ScaleNormalize {
    factors: Vec<f64>,
}

impl<T: Scalar> CustomOp<T> for ScaleNormalize {
    fn name(&self) -> &'static str {
        "scale_normalize"
    }

    fn backward(&self, inputs: &[&Tensor<T>], output: &Tensor<T>, g: &Tensor<T>) -> OpResult<T> {
        let raw = inputs[0];
        let (d, v, hw) = (raw.shape()[0], raw.shape()[1], raw.shape()[2] * raw.shape()[3]);
        let s: Vec<T> = self.factors.iter().map(|&f| T::from_f64c(f)).collect();
        let mut grad = vec![T::zero(); raw.len()];
        let (r, w, g) = (raw.data(), output.data(), g.data());
        for di in 0..d {
            let base = di * v * hw;
            for i in 0..hw {
                let mut total = T::zero();
                let mut dot = T::zero();
                for vi in 0..v {
                    let k = base + vi * hw + i;
                    total = total + r[k] * s[vi];
                    dot = dot + g[k] * w[k];
                }
                if total > T::zero() {
                    for vi in 0..v {
                        let k = base + vi * hw + i;
                        grad[k] = s[vi] / total * (g[k] - dot);
                    }
                }
            }
        }
        Ok(vec![Some(Tensor::from_vec(raw.shape().to_vec(), grad)?)])
    }
}

/// Differentiable [`scale_and_normalize`].
pub fn normalize_var<T: Scalar>(tape: &mut Tape<T>, raw: Var, factors: &[f64]) -> Result<Var> {
    let out = scale_and_normalize(tape.value(raw), factors)?;
    Ok(tape.custom(&[raw], out, ScaleNormalize { factors: factors.to_vec() }))
}

struct Blend;

impl<T: Scalar> CustomOp<T> for Blend {
    fn name(&self) -> &'static str {
        "blend"
    }

    fn backward(&self, inputs: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>) -> OpResult<T> {
        let (hwv, weights) = (inputs[0], inputs[1]);
        let [d, v, _, h, w] = hwv.shape()[..] else {
            return Err(TensorError::Contract("blend expects a rank-5 volume".into()));
        };
        let hw = h * w;
        let (x, gd, wd) = (hwv.data(), g.data(), weights.data());
        let mut gw = vec![T::zero(); weights.len()];
        let mut gx = vec![T::zero(); hwv.len()];
        for di in 0..d {
            for vi in 0..v {
                let wk = (di * v + vi) * hw;
                for c in 0..3 {
                    let xk = ((di * v + vi) * 3 + c) * hw;
                    let gk = (di * 3 + c) * hw;
                    for i in 0..hw {
                        gw[wk + i] = gw[wk + i] + gd[gk + i] * x[xk + i];
                        gx[xk + i] = gd[gk + i] * wd[wk + i];
                    }
                }
            }
        }
        Ok(vec![
            Some(Tensor::from_vec(hwv.shape().to_vec(), gx)?),
            Some(Tensor::from_vec(weights.shape().to_vec(), gw)?),
        ])
    }
}

/// Differentiable [`blend`] of a `D×V×3×H×W` volume with `D×V×H×W` weights.
pub fn blend_var<T: Scalar>(tape: &mut Tape<T>, hwv: Var, weights: Var) -> Result<Var> {
    let out = blend(tape.value(hwv), tape.value(weights))?;
    Ok(tape.custom(&[hwv, weights], out, Blend))
}

struct Composite;

impl<T: Scalar> CustomOp<T> for Composite {
    fn name(&self) -> &'static str {
        "composite"
    }

    fn backward(&self, inputs: &[&Tensor<T>], output: &Tensor<T>, g: &Tensor<T>) -> OpResult<T> {
        let (rgb, alpha) = (inputs[0], inputs[1]);
        let d = rgb.shape()[0];
        let hw = rgb.shape()[2] * rgb.shape()[3];
        let (c, a) = (rgb.data(), alpha.data());
        // gradient is blocked where the output was clamped
        let go: Vec<T> = g
            .data()
            .iter()
            .zip(output.data())
            .map(|(&gv, &o)| if o > T::zero() && o < T::one() { gv } else { T::zero() })
            .collect();
        // behind[d] = composite of planes d+1.. (what plane d is laid over)
        let mut behind = vec![T::zero(); d * 3 * hw];
        let mut acc = vec![T::zero(); 3 * hw];
        for di in (0..d).rev() {
            behind[di * 3 * hw..(di + 1) * 3 * hw].copy_from_slice(&acc);
            for ch in 0..3 {
                for i in 0..hw {
                    let av = a[di * hw + i];
                    let k = ch * hw + i;
                    acc[k] = c[(di * 3 + ch) * hw + i] * av + acc[k] * (T::one() - av);
                }
            }
        }
        let mut gc = vec![T::zero(); rgb.len()];
        let mut ga = vec![T::zero(); alpha.len()];
        let mut trans = vec![T::one(); hw];
        for di in 0..d {
            for i in 0..hw {
                let av = a[di * hw + i];
                let mut s = T::zero();
                for ch in 0..3 {
                    let k = (di * 3 + ch) * hw + i;
                    let gv = go[ch * hw + i] * trans[i];
                    gc[k] = gv * av;
                    s = s + gv * (c[k] - behind[k]);
                }
                ga[di * hw + i] = s;
                trans[i] = trans[i] * (T::one() - av);
            }
        }
        Ok(vec![
            Some(Tensor::from_vec(rgb.shape().to_vec(), gc)?),
            Some(Tensor::from_vec(alpha.shape().to_vec(), ga)?),
        ])
    }
}

/// Differentiable back-to-front composite; the output is `3×H×W`.
pub fn composite_var<T: Scalar>(tape: &mut Tape<T>, rgb: Var, alpha: Var) -> Result<Var> {
    let (h, w) = (tape.value(rgb).shape()[2], tape.value(rgb).shape()[3]);
    let out: Vec<T> = composite_raw(tape.value(rgb), tape.value(alpha))?
        .into_iter()
        .map(|v| v.max(T::zero()).min(T::one()))
        .collect();
    let out = Tensor::from_vec(vec![3, h, w], out)?;
    Ok(tape.custom(&[rgb, alpha], out, Composite))
}

struct WarpPlanes {
    maps: Vec<SamplingMap>,
}

impl<T: Scalar> CustomOp<T> for WarpPlanes {
    fn name(&self) -> &'static str {
        "warp_planes"
    }

    fn backward(&self, inputs: &[&Tensor<T>], output: &Tensor<T>, g: &Tensor<T>) -> OpResult<T> {
        let x = inputs[0];
        let (d, c) = (x.shape()[0], x.shape()[1]);
        let hw = x.shape()[2] * x.shape()[3];
        let ohw = output.shape()[2] * output.shape()[3];
        let mut gx = vec![T::zero(); x.len()];
        for di in 0..d {
            for ci in 0..c {
                let k = di * c + ci;
                self.maps[di].accumulate_adjoint(&g.data()[k * ohw..(k + 1) * ohw], &mut gx[k * hw..(k + 1) * hw]);
            }
        }
        Ok(vec![Some(Tensor::from_vec(x.shape().to_vec(), gx)?)])
    }
}

/// Differentiable per-plane warp of a `D×C×H×W` stack.
pub fn warp_planes_var<T: Scalar>(tape: &mut Tape<T>, planes: Var, maps: Vec<SamplingMap>) -> Result<Var> {
    let out = warp_planes(tape.value(planes), &maps).map_err(op_err)?;
    Ok(tape.custom(&[planes], out, WarpPlanes { maps }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Camera, PlaneSet};
    use crate::mpi::ops::reference_to_target_maps;
    use liveview_tensor::gradcheck::{check, tape_gradients, tape_value, Entries};
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
    }

    fn projection(tape: &mut Tape<f64>, x: Var, seed: u64) -> Var {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = tape.value(x).shape().to_vec();
        let p = rand_tensor(&mut rng, &shape, -1.0, 1.0);
        let p = tape.constant(p);
        let m = tape.mul(x, p).unwrap();
        tape.sum(m)
    }

    fn assert_grads(inputs: Vec<Tensor<f64>>, mut build: impl FnMut(&mut Tape<f64>, &[Var]) -> liveview_tensor::Result<Var>) {
        let (_, analytic) = tape_gradients(&inputs, &mut build).unwrap();
        let report = check(&inputs, &analytic, |p| tape_value(p, &mut build), 1e-5, Entries::All, 1e-6);
        assert!(report.max_rel_err < 1e-5, "{report:?}");
    }

    #[test]
    fn normalize_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw = rand_tensor(&mut rng, &[2, 3, 2, 2], 0.05, 1.0);
        let factors = vec![1.0, 0.4, 2.5];
        assert_grads(vec![raw], |t, v| {
            let y = normalize_var(t, v[0], &factors).map_err(|e| TensorError::Contract(e.to_string()))?;
            Ok(projection(t, y, 7))
        });
    }

    #[test]
    fn blend_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let hwv = rand_tensor(&mut rng, &[2, 3, 3, 2, 3], 0.0, 1.0);
        let w = rand_tensor(&mut rng, &[2, 3, 2, 3], 0.0, 1.0);
        assert_grads(vec![hwv, w], |t, v| {
            let y = blend_var(t, v[0], v[1]).map_err(|e| TensorError::Contract(e.to_string()))?;
            Ok(projection(t, y, 8))
        });
    }

    #[test]
    fn composite_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rgb = rand_tensor(&mut rng, &[4, 3, 3, 3], 0.05, 0.95);
        let alpha = rand_tensor(&mut rng, &[4, 1, 3, 3], 0.05, 0.95);
        assert_grads(vec![rgb, alpha], |t, v| {
            let y = composite_var(t, v[0], v[1]).map_err(|e| TensorError::Contract(e.to_string()))?;
            Ok(projection(t, y, 9))
        });
    }

    #[test]
    fn warp_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reference = Camera::centered(10, 8, 9.0, Vector3::zeros()).unwrap();
        let target = reference.with_center(Vector3::new(0.13, -0.05, 0.02));
        let planes = PlaneSet::from_depths(vec![1.0, 3.0]).unwrap();
        let maps = reference_to_target_maps(&reference, &target, &planes).unwrap();
        let x = rand_tensor(&mut rng, &[2, 4, 8, 10], 0.0, 1.0);
        assert_grads(vec![x], |t, v| {
            let y = warp_planes_var(t, v[0], maps.clone()).map_err(|e| TensorError::Contract(e.to_string()))?;
            Ok(projection(t, y, 10))
        });
    }

    #[test]
    fn composite_var_matches_plain_composite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rgb = rand_tensor(&mut rng, &[3, 3, 4, 4], 0.0, 1.0);
        let alpha = rand_tensor(&mut rng, &[3, 4, 4], 0.0, 1.0);
        let mut tape = Tape::new();
        let (r, a) = (tape.constant(rgb.clone()), tape.constant(alpha.clone()));
        let out = composite_var(&mut tape, r, a).unwrap();
        let plain = crate::mpi::composite(&rgb, &alpha).unwrap();
        assert_eq!(tape.value(out).data(), plain.data());
    }
}
