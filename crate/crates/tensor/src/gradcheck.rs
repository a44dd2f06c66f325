//! Central finite-difference gradient checking.
//!
//! The numerical side only ever evaluates the forward function, so it is
//! independent of the backward rules it is used to verify.

use crate::{Result, Tape, Tensor, Var};

/// Which entries of each input to perturb.
#[derive(Clone, Copy, Debug)]
pub enum Entries {
    All,
    /// `count` pseudo-random entries per tensor plus the entry with the
    /// largest analytic gradient.
    Sample { count: usize, seed: u64 },
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `(input index, flat entry)` of the worst mismatch.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn merge(&mut self, other: &GradCheckReport, offset: usize) {
        if other.max_rel_err > self.max_rel_err {
            self.max_rel_err = other.max_rel_err;
            self.worst = other.worst.map(|(i, e)| (i + offset, e));
        }
        self.checked += other.checked;
    }
}

/// Relative error with an absolute floor so that near-zero gradients are
/// compared absolutely.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn pick(len: usize, analytic: &Tensor<f64>, entries: Entries, salt: u64) -> Vec<usize> {
    match entries {
        Entries::All => (0..len).collect(),
        Entries::Sample { count, seed } => {
            let mut state = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
            let mut out: Vec<usize> = (0..count.min(len))
                .map(|_| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state % len as u64) as usize
                })
                .collect();
            if let Some((imax, _)) = analytic
                .data()
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            {
                out.push(imax);
            }
            out.sort_unstable();
            out.dedup();
            out
        }
    }
}

/// Compares `analytic[i]` against central differences of `f` around `inputs`.
pub fn check(
    inputs: &[Tensor<f64>],
    analytic: &[Tensor<f64>],
    mut f: impl FnMut(&[Tensor<f64>]) -> f64,
    step: f64,
    entries: Entries,
    floor: f64,
) -> GradCheckReport {
    let mut report = GradCheckReport::default();
    let mut probe = inputs.to_vec();
    for (ti, grad) in analytic.iter().enumerate() {
        for e in pick(inputs[ti].len(), grad, entries, ti as u64) {
            let orig = probe[ti].data()[e];
            probe[ti].data_mut()[e] = orig + step;
            let plus = f(&probe);
            probe[ti].data_mut()[e] = orig - step;
            let minus = f(&probe);
            probe[ti].data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(grad.data()[e], numeric, floor);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((ti, e));
            }
        }
    }
    report
}

/// Builds the graph with `build` on a fresh tape, back-propagates, and
/// returns the loss and the gradient for every input.
pub fn tape_gradients(
    inputs: &[Tensor<f64>],
    build: &mut dyn FnMut(&mut Tape<f64>, &[Var]) -> Result<Var>,
) -> Result<(f64, Vec<Tensor<f64>>)> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let loss = build(&mut tape, &vars)?;
    tape.backward(loss)?;
    let value = tape.value(loss).data()[0];
    let grads = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| tape.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok((value, grads))
}

/// Forward-only evaluation of the same graph builder.
pub fn tape_value(
    inputs: &[Tensor<f64>],
    build: &mut dyn FnMut(&mut Tape<f64>, &[Var]) -> Result<Var>,
) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), false)).collect();
    let loss = build(&mut tape, &vars).expect("forward succeeded once already");
    tape.value(loss).data()[0]
}
