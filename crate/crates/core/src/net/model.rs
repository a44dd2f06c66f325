use liveview_tensor::kernels::{activation, batchnorm, conv, pad, upsample};
use liveview_tensor::{
    BatchNormStats, BnMode, Checkpoint, CheckpointHeader, ParamRecord, Scalar, Tape, Tensor, Var,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::layers::{layer_specs, LayerSpec, KERNEL};
use super::{Centering, HeadMode, NetworkConfig, PlaneContext};
use crate::error::{contract, Result};

/// Encoder stride reached at the bottleneck; inputs are padded to a multiple.
pub const STRIDE_MULTIPLE: usize = 8;

/// Per-plane network output.
#[derive(Clone, Debug, PartialEq)]
pub struct NetOutput<T> {
    /// `N×1×H×W`, strictly inside (0, 1).
    pub alpha: Tensor<T>,
    /// `N×V×H×W`, each pixel sums to one over views.
    pub weights: Tensor<T>,
}

/// The U-Net mapping one plane's warped views to its alpha and blending
/// weights.
#[derive(Clone, Debug)]
pub struct Network<T> {
    config: NetworkConfig,
    layers: Vec<LayerSpec>,
    weights: Vec<Tensor<T>>,
    biases: Vec<Tensor<T>>,
    gammas: Vec<Tensor<T>>,
    betas: Vec<Tensor<T>>,
    stats: Vec<BatchNormStats<T>>,
    trained_planes: usize,
}

/// Shapes the forward pass has to agree on, shared by both backends.
trait Backend<T: Scalar> {
    type X: Clone;
    fn shape(&self, x: &Self::X) -> Vec<usize>;
    fn conv(&mut self, x: &Self::X, layer: usize) -> Result<Self::X>;
    fn bn_relu(&mut self, x: &Self::X, layer: usize) -> Result<Self::X>;
    fn upsample(&mut self, x: &Self::X) -> Result<Self::X>;
    fn concat(&mut self, a: &Self::X, b: &Self::X) -> Result<Self::X>;
    fn pad(&mut self, x: &Self::X, eh: usize, ew: usize) -> Result<Self::X>;
    fn crop(&mut self, x: &Self::X, h: usize, w: usize) -> Result<Self::X>;
    fn heads(&mut self, x: &Self::X, weight_channels: usize, views: usize) -> Result<(Self::X, Self::X)>;
    fn record(&mut self, _name: &'static str, _x: &Self::X) {}
}

fn unet<T: Scalar, B: Backend<T>>(b: &mut B, config: &NetworkConfig, x: &B::X) -> Result<(B::X, B::X)> {
    let shape = b.shape(x);
    let (h, w) = (shape[2], shape[3]);
    let (eh, ew) = ((STRIDE_MULTIPLE - h % STRIDE_MULTIPLE) % STRIDE_MULTIPLE, (STRIDE_MULTIPLE - w % STRIDE_MULTIPLE) % STRIDE_MULTIPLE);
    let x = if eh + ew > 0 { b.pad(x, eh, ew)? } else { x.clone() };
    let block = |b: &mut B, x: &B::X, layer: usize, name| -> Result<B::X> {
        let y = b.conv(x, layer)?;
        let y = b.bn_relu(&y, layer)?;
        b.record(name, &y);
        Ok(y)
    };
    let c1 = block(b, &x, 0, "conv1")?;
    let c2 = block(b, &c1, 1, "conv2")?;
    let c3 = block(b, &c2, 2, "conv3")?;
    let c4 = block(b, &c3, 3, "conv4")?;
    let c5 = block(b, &c4, 4, "conv5")?;
    let u5 = b.upsample(&c5)?;
    let s5 = b.concat(&u5, &c3)?;
    let c6 = block(b, &s5, 5, "conv6")?;
    let u6 = b.upsample(&c6)?;
    let s6 = b.concat(&u6, &c2)?;
    let c7 = block(b, &s6, 6, "conv7")?;
    let u7 = b.upsample(&c7)?;
    let s7 = b.concat(&u7, &c1)?;
    let c8 = block(b, &s7, 7, "conv8")?;
    let c9 = b.conv(&c8, 8)?;
    b.record("conv9", &c9);
    let c9 = if eh + ew > 0 { b.crop(&c9, h, w)? } else { c9 };
    b.heads(&c9, config.weight_channels(), config.num_views)
}

struct Eval<'a, T: Scalar> {
    net: &'a Network<T>,
    trace: Option<Vec<(&'static str, Vec<usize>)>>,
}

impl<T: Scalar> Backend<T> for Eval<'_, T> {
    type X = Tensor<T>;

    fn shape(&self, x: &Tensor<T>) -> Vec<usize> {
        x.shape().to_vec()
    }

    fn conv(&mut self, x: &Tensor<T>, layer: usize) -> Result<Tensor<T>> {
        let n = self.net;
        Ok(conv::conv2d_forward(x, &n.weights[layer], Some(&n.biases[layer]), n.layers[layer].stride, 1)?)
    }

    fn bn_relu(&mut self, x: &Tensor<T>, layer: usize) -> Result<Tensor<T>> {
        let n = self.net;
        let mut stats = n.stats[layer].clone();
        let saved = batchnorm::batchnorm2d_forward(x, &n.gammas[layer], &n.betas[layer], &mut stats, BnMode::Eval)?;
        Ok(activation::relu(&saved.output))
    }

    fn upsample(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(upsample::upsample2x(x)?)
    }

    fn concat(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(Tensor::concat(&[a, b], 1)?)
    }

    fn pad(&mut self, x: &Tensor<T>, eh: usize, ew: usize) -> Result<Tensor<T>> {
        Ok(pad::reflect_pad(x, eh, ew)?)
    }

    fn crop(&mut self, x: &Tensor<T>, h: usize, w: usize) -> Result<Tensor<T>> {
        Ok(pad::crop(x, h, w)?)
    }

    fn heads(&mut self, x: &Tensor<T>, wc: usize, views: usize) -> Result<(Tensor<T>, Tensor<T>)> {
        let alpha = activation::sigmoid(&x.narrow(1, 0, 1)?);
        let mut weights = activation::softmax(&x.narrow(1, 1, wc)?, 1)?;
        if wc < views {
            let s = weights.shape().to_vec();
            let zeros = Tensor::zeros(&[s[0], views - wc, s[2], s[3]]);
            weights = Tensor::concat(&[&weights, &zeros], 1)?;
        }
        Ok((alpha, weights))
    }

    fn record(&mut self, name: &'static str, x: &Tensor<T>) {
        if let Some(t) = &mut self.trace {
            t.push((name, x.shape().to_vec()));
        }
    }
}

struct Recording<'a, T: Scalar> {
    tape: &'a mut Tape<T>,
    params: &'a ParamVars,
    stats: &'a mut [BatchNormStats<T>],
    mode: BnMode,
    strides: Vec<usize>,
}

/// Tape handles of every learnable tensor, in [`Network::param_names`] order.
#[derive(Clone, Debug)]
pub struct ParamVars {
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
    pub gammas: Vec<Var>,
    pub betas: Vec<Var>,
}

impl ParamVars {
    pub fn all(&self) -> Vec<Var> {
        self.weights
            .iter()
            .chain(&self.biases)
            .chain(&self.gammas)
            .chain(&self.betas)
            .copied()
            .collect()
    }
}

impl<T: Scalar> Backend<T> for Recording<'_, T> {
    type X = Var;

    fn shape(&self, x: &Var) -> Vec<usize> {
        self.tape.value(*x).shape().to_vec()
    }

    fn conv(&mut self, x: &Var, layer: usize) -> Result<Var> {
        let p = self.params;
        Ok(self.tape.conv2d(*x, p.weights[layer], Some(p.biases[layer]), self.strides[layer], 1)?)
    }

    fn bn_relu(&mut self, x: &Var, layer: usize) -> Result<Var> {
        let p = self.params;
        let y = self.tape.batchnorm2d(*x, p.gammas[layer], p.betas[layer], &mut self.stats[layer], self.mode)?;
        Ok(self.tape.relu(y))
    }

    fn upsample(&mut self, x: &Var) -> Result<Var> {
        Ok(self.tape.upsample2x(*x)?)
    }

    fn concat(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Ok(self.tape.concat(&[*a, *b], 1)?)
    }

    fn pad(&mut self, x: &Var, eh: usize, ew: usize) -> Result<Var> {
        Ok(self.tape.reflect_pad(*x, eh, ew)?)
    }

    fn crop(&mut self, x: &Var, h: usize, w: usize) -> Result<Var> {
        Ok(self.tape.crop(*x, h, w)?)
    }

    fn heads(&mut self, x: &Var, wc: usize, views: usize) -> Result<(Var, Var)> {
        let a = self.tape.narrow(*x, 1, 0, 1)?;
        let alpha = self.tape.sigmoid(a);
        let l = self.tape.narrow(*x, 1, 1, wc)?;
        let mut weights = self.tape.softmax(l, 1)?;
        if wc < views {
            let s = self.tape.value(weights).shape().to_vec();
            let zeros = self.tape.constant(Tensor::zeros(&[s[0], views - wc, s[2], s[3]]));
            weights = self.tape.concat(&[weights, zeros], 1)?;
        }
        Ok((alpha, weights))
    }
}

fn kaiming<T: Scalar>(rng: &mut ChaCha8Rng, spec: &LayerSpec) -> Tensor<T> {
    let fan_in = (spec.in_channels * KERNEL * KERNEL) as f64;
    let bound = (6.0 / fan_in).sqrt();
    let n = spec.weight_count();
    let data = (0..n).map(|_| T::from_f64c(rng.gen_range(-bound..bound))).collect();
    Tensor::from_vec(vec![spec.out_channels, spec.in_channels, KERNEL, KERNEL], data)
        .expect("weight sized from spec")
}

impl<T: Scalar> Network<T> {
    /// Kaiming-uniform convolutions, zero biases, unit batch-norm scale.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layers = layer_specs(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = layers.iter().map(|l| kaiming(&mut rng, l)).collect();
        let biases = layers.iter().map(|l| Tensor::zeros(&[l.out_channels])).collect();
        let bn: Vec<&LayerSpec> = layers.iter().filter(|l| l.batchnorm).collect();
        Ok(Self {
            config,
            gammas: bn.iter().map(|l| Tensor::ones(&[l.out_channels])).collect(),
            betas: bn.iter().map(|l| Tensor::zeros(&[l.out_channels])).collect(),
            stats: bn.iter().map(|l| BatchNormStats::new(l.out_channels)).collect(),
            layers,
            weights,
            biases,
            trained_planes: 0,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Plane count used during training (0 if untrained).
    pub fn trained_planes(&self) -> usize {
        self.trained_planes
    }

    pub fn set_trained_planes(&mut self, d: usize) {
        self.trained_planes = d;
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for l in &self.layers {
            names.push(format!("{}.weight", l.name));
        }
        for l in &self.layers {
            names.push(format!("{}.bias", l.name));
        }
        for i in 0..self.gammas.len() {
            names.push(format!("bn{}.gamma", i + 1));
        }
        for i in 0..self.betas.len() {
            names.push(format!("bn{}.beta", i + 1));
        }
        names
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.weights
            .iter()
            .chain(&self.biases)
            .chain(&self.gammas)
            .chain(&self.betas)
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.weights
            .iter_mut()
            .chain(&mut self.biases)
            .chain(&mut self.gammas)
            .chain(&mut self.betas)
            .collect()
    }

    pub fn batchnorm_stats(&self) -> &[BatchNormStats<T>] {
        &self.stats
    }

    /// Learnable scalars (running statistics excluded).
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        match *shape {
            [_, c, h, w] if c == self.config.input_channels() && h >= 2 && w >= 2 => Ok(()),
            _ => contract(format!(
                "network expects N×{}×H×W input, got {shape:?}",
                self.config.input_channels()
            )),
        }
    }

    /// Inference with running batch-norm statistics on an `N×C×H×W` batch.
    /// Every plane is processed independently, so results do not depend on
    /// the batch composition.
    pub fn forward(&self, input: &Tensor<T>) -> Result<NetOutput<T>> {
        self.check_input(input.shape())?;
        let mut b = Eval { net: self, trace: None };
        let (alpha, weights) = unet(&mut b, &self.config, input)?;
        Ok(NetOutput { alpha, weights })
    }

    /// [`Network::forward`] with planes spread over the rayon pool.
    pub fn forward_par(&self, input: &Tensor<T>) -> Result<NetOutput<T>> {
        self.check_input(input.shape())?;
        let n = input.shape()[0];
        let outs: Vec<NetOutput<T>> = (0..n)
            .into_par_iter()
            .map(|i| self.forward(&input.narrow(0, i, 1)?))
            .collect::<Result<_>>()?;
        let alphas: Vec<&Tensor<T>> = outs.iter().map(|o| &o.alpha).collect();
        let weights: Vec<&Tensor<T>> = outs.iter().map(|o| &o.weights).collect();
        Ok(NetOutput {
            alpha: Tensor::concat(&alphas, 0)?,
            weights: Tensor::concat(&weights, 0)?,
        })
    }

    /// Output shape of every convolution block for an `H×W` input.
    pub fn trace_shapes(&self, height: usize, width: usize) -> Result<Vec<(&'static str, Vec<usize>)>> {
        let input = Tensor::zeros(&[1, self.config.input_channels(), height, width]);
        let mut b = Eval { net: self, trace: Some(Vec::new()) };
        unet(&mut b, &self.config, &input)?;
        Ok(b.trace.unwrap_or_default())
    }

    /// Puts every learnable tensor on `tape` as a gradient-tracking leaf.
    pub fn register(&self, tape: &mut Tape<T>) -> ParamVars {
        let mut leaf = |ts: &[Tensor<T>]| ts.iter().map(|t| tape.leaf(t.clone(), true)).collect();
        ParamVars {
            weights: leaf(&self.weights),
            biases: leaf(&self.biases),
            gammas: leaf(&self.gammas),
            betas: leaf(&self.betas),
        }
    }

    /// Records the forward pass; in [`BnMode::Train`] the running statistics
    /// are updated. Returns `(alpha, weights)` handles.
    pub fn forward_tape(
        &mut self,
        tape: &mut Tape<T>,
        params: &ParamVars,
        input: Var,
        mode: BnMode,
    ) -> Result<(Var, Var)> {
        self.check_input(tape.value(input).shape())?;
        let config = self.config;
        let strides = self.layers.iter().map(|l| l.stride).collect();
        let mut b = Recording { tape, params, stats: &mut self.stats, mode, strides };
        unet(&mut b, &config, &input)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let header = CheckpointHeader {
            version: liveview_tensor::checkpoint::VERSION,
            num_views: self.config.num_views as u32,
            head_mode: self.config.head_mode.code(),
            centering: self.config.centering.code(),
            plane_context: self.config.context.code(),
            trained_planes: self.trained_planes as u32,
        };
        let mut records: Vec<ParamRecord> = self
            .param_names()
            .iter()
            .zip(self.params())
            .map(|(n, t)| ParamRecord::from_tensor(n.clone(), t))
            .collect();
        for (i, s) in self.stats.iter().enumerate() {
            records.push(ParamRecord::from_tensor(format!("bn{}.running_mean", i + 1), &s.running_mean));
            records.push(ParamRecord::from_tensor(format!("bn{}.running_var", i + 1), &s.running_var));
        }
        Checkpoint { header, records }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let h = &ckpt.header;
        let config = NetworkConfig {
            num_views: h.num_views as usize,
            head_mode: HeadMode::from_code(h.head_mode)?,
            centering: Centering::from_code(h.centering)?,
            context: PlaneContext::from_code(h.plane_context)?,
        };
        let mut net = Self::init(config, 0)?;
        net.trained_planes = h.trained_planes as usize;
        let names = net.param_names();
        let fetch = |name: &str, like: &Tensor<T>| -> Result<Tensor<T>> {
            let Some(r) = ckpt.get(name) else {
                return contract(format!("checkpoint is missing {name}"));
            };
            let t = r.to_tensor::<T>()?;
            if t.shape() != like.shape() {
                return contract(format!("{name} has shape {:?}, expected {:?}", t.shape(), like.shape()));
            }
            Ok(t)
        };
        let loaded: Vec<Tensor<T>> = names
            .iter()
            .zip(net.params())
            .map(|(n, t)| fetch(n, t))
            .collect::<Result<_>>()?;
        for (dst, src) in net.params_mut().into_iter().zip(loaded) {
            *dst = src;
        }
        for i in 0..net.stats.len() {
            let mean = fetch(&format!("bn{}.running_mean", i + 1), &net.stats[i].running_mean)?;
            let var = fetch(&format!("bn{}.running_var", i + 1), &net.stats[i].running_var)?;
            net.stats[i] = BatchNormStats { running_mean: mean, running_var: var };
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    /// Same weights in another precision.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let c = |ts: &[Tensor<T>]| ts.iter().map(|t| t.cast::<U>()).collect();
        Network {
            config: self.config,
            layers: self.layers.clone(),
            weights: c(&self.weights),
            biases: c(&self.biases),
            gammas: c(&self.gammas),
            betas: c(&self.betas),
            stats: self
                .stats
                .iter()
                .map(|s| BatchNormStats {
                    running_mean: s.running_mean.cast(),
                    running_var: s.running_var.cast(),
                })
                .collect(),
            trained_planes: self.trained_planes,
        }
    }
}
