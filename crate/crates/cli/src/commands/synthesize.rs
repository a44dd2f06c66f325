use std::path::PathBuf;

use clap::Args;
use liveview_core::metrics::{psnr, ssim};
use liveview_core::mpi::save_mpi_dump;
use liveview_core::synth::Synthesizer;
use liveview_tensor::Scalar;

use crate::error::{usage, Result};
use crate::inputs::{load_plane_file, parse_pose, uniform_planes, ViewSet};
use crate::model::{load_model, Model};
use crate::{Global, Precision};

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub setup: Option<PathBuf>,
    /// Scene directory or `scene.json`; inputs are rendered from the rig.
    #[arg(long, conflicts_with_all = ["images", "cameras"])]
    pub scene: Option<PathBuf>,
    /// Input PNGs in the order of `--cameras`.
    #[arg(long, value_delimiter = ',', requires = "cameras")]
    pub images: Vec<PathBuf>,
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    /// Target centre `x,y,z` in meters (default: the target in
    /// `cameras.json`, else the origin).
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub target_pose: Option<[f64; 3]>,
    #[arg(long, conflicts_with = "plane_file")]
    pub planes: Option<usize>,
    /// JSON with a `depths` array.
    #[arg(long)]
    pub plane_file: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-plane RGBA dumps into this directory.
    #[arg(long)]
    pub dump_mpi: Option<PathBuf>,
}

/// Quality against ground truth when the scene is known.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthesisResult {
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

pub fn run(args: &SynthesizeArgs, global: &Global) -> Result<SynthesisResult> {
    let model = load_model(&args.checkpoint, args.setup.as_deref())?;
    let inputs = match (&args.scene, &args.cameras) {
        (Some(scene), _) => ViewSet::from_scene(scene, &model.setup)?,
        (None, Some(cams)) if !args.images.is_empty() => ViewSet::from_files(&args.images, cams)?,
        _ => return usage("give --scene, or --images with --cameras"),
    };
    if inputs.views.len() != model.net.config().num_views {
        return usage(format!(
            "checkpoint expects {} views, got {}",
            model.net.config().num_views,
            inputs.views.len()
        ));
    }
    match global.precision {
        Precision::F32 => synthesize::<f32>(args, &model, &inputs),
        Precision::F64 => synthesize::<f64>(args, &model, &inputs),
    }
}

fn synthesize<T: Scalar>(args: &SynthesizeArgs, model: &Model, inputs: &ViewSet) -> Result<SynthesisResult> {
    let target = match (args.target_pose, &inputs.target) {
        (Some(p), _) => inputs.camera_at(p),
        (None, Some(t)) => t.clone(),
        (None, None) => inputs.camera_at([0.0; 3]),
    };
    let planes = match (&args.plane_file, args.planes) {
        (Some(p), _) => load_plane_file(p)?,
        (None, Some(d)) => uniform_planes(&model.setup, d)?,
        (None, None) => uniform_planes(&model.setup, model.setup.planes)?,
    };
    let reference = model.setup.rig()?.reference_index().min(inputs.views.len() - 1);
    let synth = Synthesizer::new(
        model.net.cast::<T>(),
        inputs.views.iter().map(|v| v.cast()).collect(),
        inputs.cameras.clone(),
        reference,
    )?;
    let r = synth.render(&target, &planes)?;
    r.image.save_png(&args.out)?;
    if let Some(dir) = &args.dump_mpi {
        save_mpi_dump(dir, &r.rgb, &r.alpha, &r.planes)?;
    }
    let mut result = SynthesisResult { psnr: None, ssim: None };
    if let Some(gt) = inputs.ground_truth(&target) {
        let gt = gt.cast::<T>();
        result = SynthesisResult { psnr: Some(psnr(&r.image, &gt)?), ssim: Some(ssim(&r.image, &gt)?) };
    }
    match (result.psnr, result.ssim) {
        (Some(p), Some(s)) => println!("wrote {} ({} planes), PSNR {p:.3} dB, SSIM {s:.4}", args.out.display(), planes.len()),
        _ => println!("wrote {} ({} planes)", args.out.display(), planes.len()),
    }
    Ok(result)
}
