//! Procedural-scene training of the plane network.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use liveview_tensor::{Adam, AdamConfig, BnMode, Scalar, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::geometry::{equidisparity_planes, Camera, PlaneSet};
use crate::image::Image;
use crate::mpi::diff::{blend_var, composite_var, normalize_var, warp_planes_var};
use crate::mpi::{build_hwv, inverse_distances, reference_to_target_maps};
use crate::net::{Centering, HeadMode, NetworkConfig, Network, PlaneContext};
use crate::scene::{generate_scene, make_example, Example, Rig, RigKind, SceneConfig};
use crate::synth::network_batch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    L1,
    L2,
}

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub rig: RigKind,
    /// Input camera spacing in meters.
    pub baseline: f64,
    /// Fraction of the rig hull targets are drawn from.
    pub jitter: f64,
    pub planes: usize,
    pub z_near: f64,
    pub z_far: f64,
    pub iterations: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub loss: LossKind,
    pub seed: u64,
    pub head_mode: HeadMode,
    pub centering: Centering,
    pub context: PlaneContext,
    /// Validate every this many iterations (0 disables).
    pub val_every: usize,
    pub val_scenes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            width: 96,
            height: 96,
            focal: 96.0,
            rig: RigKind::Cross5,
            baseline: 0.15,
            jitter: 0.9,
            planes: 16,
            z_near: 2.0,
            z_far: 20.0,
            iterations: 5000,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            loss: LossKind::L1,
            seed: 0,
            head_mode: HeadMode::SoftmaxV,
            centering: Centering::Target,
            context: PlaneContext::Dynamic,
            val_every: 500,
            val_scenes: 8,
        }
    }
}

/// Training scenes use seeds below this bit; held-out scenes set it.
pub const HELD_OUT_BIT: u64 = 1 << 62;
const VALIDATION_BIT: u64 = 1 << 61;

/// Seed of training scene `i`.
pub fn training_seed(seed: u64, i: usize) -> u64 {
    ((seed & 0x1fff_ffff) << 32) | (i as u64 & 0xffff_ffff)
}

/// Seed of held-out scene `i`; never collides with a training seed.
pub fn held_out_seed(seed: u64, i: usize) -> u64 {
    HELD_OUT_BIT | training_seed(seed, i)
}

fn validation_seed(seed: u64, i: usize) -> u64 {
    VALIDATION_BIT | training_seed(seed, i)
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return contract("iterations must be at least 1");
        }
        if self.planes == 0 {
            return contract("plane count must be at least 1");
        }
        self.network_config().validate()
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            num_views: self.rig.num_views(),
            head_mode: self.head_mode,
            centering: self.centering,
            context: self.context,
        }
    }

    pub fn camera(&self) -> Result<Camera> {
        Camera::centered(self.width, self.height, self.focal, nalgebra::Vector3::zeros())
    }

    pub fn rig(&self) -> Result<Rig> {
        Rig::new(self.rig, self.baseline, self.camera()?)
    }

    pub fn scene_config(&self) -> Result<SceneConfig> {
        let mut c = SceneConfig::default_for(&self.camera()?, self.baseline);
        c.z_near = self.z_near;
        c.z_far = self.z_far;
        Ok(c)
    }

    pub fn plane_set(&self) -> Result<PlaneSet> {
        equidisparity_planes(self.z_near, self.z_far, self.planes)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }

    /// Example drawn from scene seed `scene_seed`.
    pub fn example<T: Scalar>(&self, scene_seed: u64) -> Result<Example<T>> {
        let scene = generate_scene(scene_seed, &self.scene_config()?);
        Ok(make_example(&scene, &self.rig()?, self.jitter, scene_seed.rotate_left(17) ^ 0x5eed))
    }

    /// Stable identifier of the configuration (for caching runs).
    /// Hash of the fields that determine the trained weights; validation
    /// settings are left out.
    pub fn fingerprint(&self) -> String {
        let weights_only = Self { val_every: 0, val_scenes: 0, ..self.clone() };
        let json = serde_json::to_string(&weights_only).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h = (h ^ b as u64).wrapping_mul(0x100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    pub loss: f64,
    pub val_psnr: Option<f64>,
    pub wall_ms: f64,
}

/// Composited prediction and scalar loss for one example on `tape`.
pub struct StepGraph {
    pub prediction: Var,
    pub loss: Var,
}

/// Records the full pipeline for one example: HWV, network, weight
/// normalization, blending, optional re-warp, compositing and the loss.
pub fn record_step<T: Scalar>(
    tape: &mut Tape<T>,
    net: &mut Network<T>,
    params: &crate::net::ParamVars,
    example: &Example<T>,
    planes: &PlaneSet,
    reference: usize,
    loss: LossKind,
    mode: BnMode,
) -> Result<StepGraph> {
    let config = *net.config();
    let target = &example.target_camera;
    let mpi_camera = match config.centering {
        Centering::Target => target.clone(),
        Centering::Input => example.cameras[reference].clone(),
    };
    let hwv = build_hwv(&example.inputs, &example.cameras, &mpi_camera, planes)?;
    let x = tape.constant(network_batch(&hwv, config.context));
    let (alpha, weights) = net.forward_tape(tape, params, x, mode)?;
    let factors = match config.centering {
        Centering::Target => inverse_distances(&example.cameras, target),
        Centering::Input => vec![1.0; config.num_views],
    };
    let weights = normalize_var(tape, weights, &factors)?;
    let volume = tape.constant(hwv.data);
    let mut rgb = blend_var(tape, volume, weights)?;
    let mut alpha = alpha;
    if config.centering == Centering::Input {
        let maps = reference_to_target_maps(&mpi_camera, target, planes)?;
        rgb = warp_planes_var(tape, rgb, maps.clone())?;
        alpha = warp_planes_var(tape, alpha, maps)?;
    }
    let prediction = composite_var(tape, rgb, alpha)?;
    let gt = tape.constant(example.target.to_tensor());
    let diff = tape.sub(prediction, gt)?;
    let per_pixel = match loss {
        LossKind::L1 => tape.abs(diff),
        LossKind::L2 => tape.mul(diff, diff)?,
    };
    let loss = tape.mean(per_pixel);
    Ok(StepGraph { prediction, loss })
}

/// Mean absolute (or squared) difference between two images.
pub fn image_loss<T: Scalar>(pred: &Image<T>, gt: &Image<T>, kind: LossKind) -> Result<f64> {
    if !pred.same_dims(gt) {
        return contract("loss needs images of equal dimensions");
    }
    let n = pred.data().len().max(1) as f64;
    let s: f64 = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(a, b)| {
            let d = a.to_f64c() - b.to_f64c();
            match kind {
                LossKind::L1 => d.abs(),
                LossKind::L2 => d * d,
            }
        })
        .sum();
    Ok(s / n)
}

/// Owns the network and optimizer state of a run.
pub struct Trainer<T: Scalar> {
    pub config: TrainConfig,
    pub net: Network<T>,
    adam: Adam<T>,
    planes: PlaneSet,
    reference: usize,
    iteration: usize,
    started: Instant,
    validation: Vec<Example<T>>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut net = Network::init(config.network_config(), config.seed)?;
        net.set_trained_planes(config.planes);
        let adam = Adam::new(config.adam(), net.params());
        let validation = (0..config.val_scenes)
            .map(|i| config.example(validation_seed(config.seed, i)))
            .collect::<Result<_>>()?;
        Ok(Self {
            planes: config.plane_set()?,
            reference: config.rig()?.reference_index(),
            config,
            net,
            adam,
            iteration: 0,
            started: Instant::now(),
            validation,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// One optimizer step on a fresh scene; returns the loss.
    pub fn step(&mut self) -> Result<f64> {
        let scene_seed = training_seed(self.config.seed, self.iteration);
        let example = self.config.example::<T>(scene_seed)?;
        let mut tape = Tape::new();
        let params = self.net.register(&mut tape);
        let graph = record_step(
            &mut tape,
            &mut self.net,
            &params,
            &example,
            &self.planes,
            self.reference,
            self.config.loss,
            BnMode::Train,
        )?;
        let loss = tape.value(graph.loss).data()[0].to_f64c();
        let diverged = |detail: String| Error::Diverged { iteration: self.iteration + 1, seed: scene_seed, detail };
        if !loss.is_finite() {
            return Err(diverged(format!("loss is {loss}")));
        }
        tape.backward(graph.loss)?;
        let vars = params.all();
        let zero: Vec<Tensor<T>> = self.net.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        let grads: Vec<&Tensor<T>> = vars
            .iter()
            .zip(&zero)
            .map(|(v, z)| tape.grad(*v).unwrap_or(z))
            .collect();
        if let Some(i) = grads.iter().position(|g| !g.all_finite()) {
            return Err(diverged(format!("non-finite gradient for {}", self.net.param_names()[i])));
        }
        self.adam.step(&mut self.net.params_mut(), &grads)?;
        self.iteration += 1;
        Ok(loss)
    }

    /// Mean PSNR over the fixed validation examples in inference mode.
    pub fn validate(&self) -> Result<f64> {
        if self.validation.is_empty() {
            return Ok(f64::NAN);
        }
        let mut total = 0.0;
        for ex in &self.validation {
            let s = crate::synth::Synthesizer::new(self.net.clone(), ex.inputs.clone(), ex.cameras.clone(), self.reference)?;
            let r = s.render(&ex.target_camera, &self.planes)?;
            total += crate::metrics::psnr(&r.image, &ex.target)?;
        }
        Ok(total / self.validation.len() as f64)
    }

    /// Runs the remaining iterations, reporting one record per step.
    pub fn run(&mut self, mut on_record: impl FnMut(&TrainRecord) -> Result<()>) -> Result<()> {
        while self.iteration < self.config.iterations {
            let loss = self.step()?;
            let it = self.iteration;
            let val = self.config.val_every > 0
                && (it % self.config.val_every == 0 || it == self.config.iterations);
            let val_psnr = if val { Some(self.validate()?) } else { None };
            on_record(&TrainRecord {
                iteration: it,
                loss,
                val_psnr,
                wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
            })?;
        }
        Ok(())
    }
}

/// CSV writer for `iteration,loss,val_psnr,wall_ms`.
pub struct TrainLog {
    writer: csv::Writer<std::fs::File>,
}

impl TrainLog {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["iteration", "loss", "val_psnr", "wall_ms"])?;
        Ok(Self { writer })
    }

    pub fn append(&mut self, r: &TrainRecord) -> Result<()> {
        self.writer.write_record([
            r.iteration.to_string(),
            format!("{:.8}", r.loss),
            r.val_psnr.map(|v| format!("{v:.4}")).unwrap_or_default(),
            format!("{:.1}", r.wall_ms),
        ])?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Trains to completion, writing the log and checkpoint into `out_dir` when
/// given. On divergence a `diverged.json` describing the batch is written.
pub fn train<T: Scalar>(config: &TrainConfig, out_dir: Option<&Path>) -> Result<(Network<T>, Vec<TrainRecord>)> {
    let mut trainer = Trainer::<T>::new(config.clone())?;
    let mut log = match out_dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            std::fs::write(d.join("train_config.json"), serde_json::to_string_pretty(config)?)?;
            Some(TrainLog::create(d.join("train_log.csv"))?)
        }
        None => None,
    };
    let mut records = Vec::new();
    let result = trainer.run(|r| {
        if let Some(l) = &mut log {
            l.append(r)?;
        }
        if r.val_psnr.is_some() {
            tracing::info!(iteration = r.iteration, loss = r.loss, val_psnr = r.val_psnr, "training");
        }
        records.push(r.clone());
        Ok(())
    });
    if let Err(Error::Diverged { iteration, seed, detail }) = &result {
        if let Some(d) = out_dir {
            let dump = serde_json::json!({ "iteration": iteration, "scene_seed": seed, "detail": detail });
            let mut f = std::fs::File::create(d.join("diverged.json"))?;
            writeln!(f, "{dump:#}")?;
        }
    }
    result?;
    if let Some(d) = out_dir {
        trainer.net.save(checkpoint_path(d))?;
    }
    Ok((trainer.net, records))
}

pub fn checkpoint_path(dir: &Path) -> PathBuf {
    dir.join("checkpoint.lvw")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TrainConfig {
        TrainConfig {
            width: 24,
            height: 24,
            focal: 24.0,
            planes: 4,
            iterations: 3,
            val_every: 0,
            val_scenes: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn seeds_are_disjoint() {
        for s in [0u64, 1, 99] {
            for i in [0usize, 1, 5000] {
                assert_eq!(training_seed(s, i) & HELD_OUT_BIT, 0);
                assert_ne!(held_out_seed(s, i) & HELD_OUT_BIT, 0);
            }
        }
        assert_ne!(training_seed(1, 0), training_seed(0, 1));
    }

    #[test]
    fn loss_oracles() {
        let a = Image::from_fn(3, 4, 4, |c, y, x| ((c + y * 4 + x) % 7) as f64 / 7.0);
        assert_eq!(image_loss(&a, &a, LossKind::L1).unwrap(), 0.0);
        let b = Image::from_fn(3, 4, 4, |c, y, x| a.get(c, y, x) + 0.1);
        assert!((image_loss(&b, &a, LossKind::L1).unwrap() - 0.1).abs() < 1e-12);
        assert!(image_loss(&a, &Image::filled(3, 4, 5, 0.0), LossKind::L1).is_err());
    }

    #[test]
    fn one_iteration_is_finite() {
        for (centering, context) in [
            (Centering::Target, PlaneContext::Dynamic),
            (Centering::Input, PlaneContext::Static),
        ] {
            let mut t = Trainer::<f32>::new(TrainConfig { centering, context, ..tiny() }).unwrap();
            let loss = t.step().unwrap();
            assert!(loss.is_finite() && loss > 0.0);
            assert!(t.net.params().iter().all(|p| p.all_finite()));
        }
    }

    #[test]
    fn identical_runs_give_identical_losses() {
        let run = || {
            let mut t = Trainer::<f32>::new(tiny()).unwrap();
            (0..3).map(|_| t.step().unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn fingerprint_tracks_config() {
        assert_eq!(tiny().fingerprint(), tiny().fingerprint());
        assert_ne!(tiny().fingerprint(), TrainConfig { seed: 3, ..tiny() }.fingerprint());
        assert_eq!(tiny().fingerprint(), TrainConfig { val_every: 1, val_scenes: 2, ..tiny() }.fingerprint());
    }

    #[test]
    fn validation_leaves_the_weights_alone() {
        let run = |val_every| {
            let mut t = Trainer::<f32>::new(TrainConfig { iterations: 2, val_every, val_scenes: 2, ..tiny() }).unwrap();
            t.run(|_| Ok(())).unwrap();
            t.net.params().into_iter().cloned().collect::<Vec<_>>()
        };
        assert_eq!(run(0), run(1));
    }
}
