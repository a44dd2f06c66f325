//! Tape-based reverse-mode automatic differentiation.
//!
//! Every op appends a node holding its value and enough context to
//! propagate gradients. Nodes are created in topological order, so the
//! backward pass is a single reverse sweep.

use crate::error::{shape_err, Result, TensorError};
use crate::kernels::activation::{self, split_axis};
use crate::kernels::batchnorm::{self, BatchNormStats, BnMode, BnSaved};
use crate::kernels::{conv, pad, upsample};
use crate::{Scalar, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A differentiable op implemented outside this crate.
///
/// The caller computes the forward value itself and hands it to
/// [`Tape::custom`]; the op only has to supply vector-Jacobian products.
pub trait CustomOp<T: Scalar>: Send {
    fn name(&self) -> &'static str;

    /// Gradients with respect to each input, in the order given to
    /// [`Tape::custom`]. `None` means "no gradient flows to this input".
    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        output: &Tensor<T>,
        grad_output: &Tensor<T>,
    ) -> Result<Vec<Option<Tensor<T>>>>;
}

enum Op<T: Scalar> {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    },
    BatchNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        saved: BnSaved<T>,
    },
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var, usize),
    Upsample2x(Var),
    ReflectPad(Var),
    Crop(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Abs(Var),
    Sum(Var),
    Mean(Var),
    Concat(Vec<Var>, usize),
    Narrow {
        input: Var,
        axis: usize,
        start: usize,
    },
    Custom(Vec<Var>, Box<dyn CustomOp<T>>),
}

struct Node<T: Scalar> {
    value: Tensor<T>,
    requires_grad: bool,
    op: Op<T>,
}

/// Records a computation for a single backward pass.
///
/// A training step owns its tape exclusively; build a fresh tape (or call
/// [`Tape::clear_grads`]) before differentiating again.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
    backward_done: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last backward pass for a leaf node.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn clear_grads(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let out = conv::conv2d_forward(
            self.value(input),
            self.value(weight),
            bias.map(|b| self.value(b)),
            stride,
            padding,
        )?;
        let mut inputs = vec![input, weight];
        inputs.extend(bias);
        Ok(self.push(
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                padding,
            },
            &inputs,
        ))
    }

    pub fn batchnorm2d(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        stats: &mut BatchNormStats<T>,
        mode: BnMode,
    ) -> Result<Var> {
        let mut saved = batchnorm::batchnorm2d_forward(
            self.value(input),
            self.value(gamma),
            self.value(beta),
            stats,
            mode,
        )?;
        let out = std::mem::replace(&mut saved.output, Tensor::zeros(&[0]));
        Ok(self.push(
            out,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                saved,
            },
            &[input, gamma, beta],
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = activation::relu(self.value(x));
        self.push(out, Op::Relu(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = activation::sigmoid(self.value(x));
        self.push(out, Op::Sigmoid(x), &[x])
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let out = activation::softmax(self.value(x), axis)?;
        Ok(self.push(out, Op::Softmax(x, axis), &[x]))
    }

    pub fn upsample2x(&mut self, x: Var) -> Result<Var> {
        let out = upsample::upsample2x(self.value(x))?;
        Ok(self.push(out, Op::Upsample2x(x), &[x]))
    }

    pub fn reflect_pad(&mut self, x: Var, extra_h: usize, extra_w: usize) -> Result<Var> {
        let out = pad::reflect_pad(self.value(x), extra_h, extra_w)?;
        Ok(self.push(out, Op::ReflectPad(x), &[x]))
    }

    pub fn crop(&mut self, x: Var, height: usize, width: usize) -> Result<Var> {
        let out = pad::crop(self.value(x), height, width)?;
        Ok(self.push(out, Op::Crop(x), &[x]))
    }

    fn zip_with(&self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return shape_err(op, format!("{:?} vs {:?}", ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::from_vec(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("add", a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("sub", a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("mul", a, b, |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        let out = self.value(x).map(|v| v * factor);
        self.push(out, Op::Scale(x, factor), &[x])
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.abs());
        self.push(out, Op::Abs(x), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        self.push(out, Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = Tensor::scalar(t.sum() / T::from_usize(t.len().max(1)).unwrap());
        self.push(out, Op::Mean(x), &[x])
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let values: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Tensor::concat(&values, axis)?;
        Ok(self.push(out, Op::Concat(parts.to_vec(), axis), parts))
    }

    /// Sub-range `start..start + len` along `axis`.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let out = self.value(x).narrow(axis, start, len)?;
        Ok(self.push(out, Op::Narrow { input: x, axis, start }, &[x]))
    }

    pub fn custom(
        &mut self,
        inputs: &[Var],
        output: Tensor<T>,
        op: impl CustomOp<T> + 'static,
    ) -> Var {
        self.push(output, Op::Custom(inputs.to_vec(), Box::new(op)), inputs)
    }

    /// Back-propagates from a scalar `loss`, leaving gradients on every
    /// reachable leaf that requires them.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(TensorError::Contract(
                "backward already ran on this tape; clear grads first".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::ones(self.value(loss).shape()));
        for i in (0..=loss.0).rev() {
            if matches!(self.nodes[i].op, Op::Leaf) || !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            for (input, gi) in self.vjp(i, &g)? {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&gi)?,
                    slot => *slot = Some(gi),
                }
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn vjp(&self, i: usize, g: &Tensor<T>) -> Result<Vec<(Var, Tensor<T>)>> {
        let node = &self.nodes[i];
        let val = |v: Var| &self.nodes[v.0].value;
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let same = |v: Var, f: &dyn Fn(T, T) -> T| -> Result<Tensor<T>> {
            let x = val(v);
            let data = x.data().iter().zip(g.data()).map(|(&a, &b)| f(a, b)).collect();
            Tensor::from_vec(x.shape().to_vec(), data)
        };
        Ok(match &node.op {
            Op::Leaf => vec![],
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                padding,
            } => {
                let grads = conv::conv2d_backward(
                    val(*input),
                    val(*weight),
                    g,
                    *stride,
                    *padding,
                    needs(*input),
                )?;
                let mut out = vec![(*weight, grads.weight)];
                if let Some(gx) = grads.input {
                    out.push((*input, gx));
                }
                if let Some(b) = bias {
                    out.push((*b, grads.bias));
                }
                out
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                saved,
            } => {
                let (dx, dg, db) = batchnorm::batchnorm2d_backward(saved, val(*gamma), g)?;
                vec![(*input, dx), (*gamma, dg), (*beta, db)]
            }
            Op::Relu(x) => vec![(*x, activation::relu_backward(val(*x), g))],
            Op::Sigmoid(x) => vec![(*x, activation::sigmoid_backward(&node.value, g))],
            Op::Softmax(x, axis) => {
                vec![(*x, activation::softmax_backward(&node.value, g, *axis)?)]
            }
            Op::Upsample2x(x) => vec![(*x, upsample::upsample2x_backward(val(*x).shape(), g)?)],
            Op::ReflectPad(x) => vec![(*x, pad::reflect_pad_backward(val(*x).shape(), g)?)],
            Op::Crop(x) => vec![(*x, pad::crop_backward(val(*x).shape(), g)?)],
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.map(|v| -v))],
            Op::Mul(a, b) => vec![
                (*a, same(*b, &|y, gv| y * gv)?),
                (*b, same(*a, &|x, gv| x * gv)?),
            ],
            Op::Scale(x, f) => vec![(*x, g.map(|v| v * *f))],
            Op::Abs(x) => vec![(
                *x,
                same(*x, &|xv, gv| {
                    if xv > T::zero() {
                        gv
                    } else if xv < T::zero() {
                        -gv
                    } else {
                        T::zero()
                    }
                })?,
            )],
            Op::Sum(x) => vec![(*x, Tensor::full(val(*x).shape(), g.data()[0]))],
            Op::Mean(x) => {
                let n = T::from_usize(val(*x).len().max(1)).unwrap();
                vec![(*x, Tensor::full(val(*x).shape(), g.data()[0] / n))]
            }
            Op::Concat(parts, axis) => {
                let (outer, total, inner) = split_axis("concat_backward", g.shape(), *axis)?;
                let mut offset = 0;
                let mut out = Vec::with_capacity(parts.len());
                for &p in parts {
                    let shape = val(p).shape().to_vec();
                    let len = shape[*axis];
                    let mut data = Vec::with_capacity(outer * len * inner);
                    for o in 0..outer {
                        let start = (o * total + offset) * inner;
                        data.extend_from_slice(&g.data()[start..start + len * inner]);
                    }
                    offset += len;
                    out.push((p, Tensor::from_vec(shape, data)?));
                }
                out
            }
            Op::Narrow { input, axis, start } => {
                let shape = val(*input).shape().to_vec();
                let (outer, n, inner) = split_axis("narrow_backward", &shape, *axis)?;
                let len = g.shape()[*axis];
                let mut data = vec![T::zero(); shape.iter().product()];
                for o in 0..outer {
                    let dst = (o * n + start) * inner;
                    data[dst..dst + len * inner]
                        .copy_from_slice(&g.data()[o * len * inner..(o + 1) * len * inner]);
                }
                vec![(*input, Tensor::from_vec(shape, data)?)]
            }
            Op::Custom(inputs, op) => {
                let values: Vec<&Tensor<T>> = inputs.iter().map(|&v| val(v)).collect();
                let grads = op.backward(&values, &node.value, g)?;
                if grads.len() != inputs.len() {
                    return Err(TensorError::Contract(format!(
                        "custom op {} returned {} gradients for {} inputs",
                        op.name(),
                        grads.len(),
                        inputs.len()
                    )));
                }
                inputs
                    .iter()
                    .zip(grads)
                    .filter_map(|(&v, gi)| gi.map(|t| (v, t)))
                    .collect()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gives_ones() {
        let mut tape = Tape::<f32>::new();
        let x = tape.leaf(Tensor::full(&[2, 3], 4.0), true);
        let loss = tape.sum(x);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &Tensor::ones(&[2, 3]));
    }

    #[test]
    fn square_sum_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_vec(vec![2], vec![1.0, 2.0]).unwrap(), true);
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::<f32>::new();
        let x = tape.leaf(Tensor::ones(&[3]), true);
        assert!(matches!(tape.backward(x), Err(TensorError::Contract(_))));
    }

    #[test]
    fn second_backward_requires_reset() {
        let mut tape = Tape::<f32>::new();
        let x = tape.leaf(Tensor::ones(&[3]), true);
        let loss = tape.sum(x);
        tape.backward(loss).unwrap();
        assert!(tape.backward(loss).is_err());
        tape.clear_grads();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[1.0; 3]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::<f32>::new();
        let x = tape.leaf(Tensor::ones(&[2]), true);
        let c = tape.constant(Tensor::full(&[2], 3.0));
        let y = tape.mul(x, c).unwrap();
        let loss = tape.sum(y);
        tape.backward(loss).unwrap();
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad(x).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn shared_input_accumulates_once_per_use() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::full(&[1], 3.0), true);
        let a = tape.add(x, x).unwrap();
        let b = tape.mul(a, x).unwrap(); // 2x²
        let loss = tape.sum(b);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[12.0]);
    }
}
