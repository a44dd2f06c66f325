use std::path::PathBuf;

use clap::Args;
use liveview_core::scene::SceneScript;
use liveview_core::video::{render_video, FrameReport, VideoOptions};
use liveview_tensor::Scalar;

use crate::error::Result;
use crate::model::{load_model, Model};
use crate::{Global, Precision};

#[derive(Debug, Args)]
pub struct VideoArgs {
    #[arg(long)]
    pub scene_script: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub setup: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub keyframe_planes: usize,
    #[arg(long, default_value_t = 16)]
    pub select_k: usize,
    /// Also render and score each frame with every keyframe plane.
    #[arg(long)]
    pub compare_full: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(args: &VideoArgs, global: &Global) -> Result<Vec<FrameReport>> {
    let script = SceneScript::load(&args.scene_script)?;
    let model = load_model(&args.checkpoint, args.setup.as_deref())?;
    std::fs::create_dir_all(&args.out_dir)?;
    let reports = match global.precision {
        Precision::F32 => video::<f32>(args, &model, &script)?,
        Precision::F64 => video::<f64>(args, &model, &script)?,
    };
    let mut w = csv::Writer::from_path(args.out_dir.join("frames.csv"))?;
    w.write_record(["frame", "planes_used", "render_ms", "psnr", "ssim", "full_psnr", "full_ssim"])?;
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
    for r in &reports {
        w.write_record([
            r.frame.to_string(),
            r.planes_used.to_string(),
            format!("{:.3}", r.render_ms),
            format!("{:.6}", r.psnr),
            format!("{:.6}", r.ssim),
            opt(r.full_psnr),
            opt(r.full_ssim),
        ])?;
    }
    w.flush()?;
    println!("rendered {} frames into {}", reports.len(), args.out_dir.display());
    Ok(reports)
}

fn video<T: Scalar>(args: &VideoArgs, model: &Model, script: &SceneScript) -> Result<Vec<FrameReport>> {
    let options = VideoOptions {
        keyframe_planes: args.keyframe_planes,
        select_k: args.select_k,
        compare_full: args.compare_full,
    };
    Ok(render_video(&model.net.cast::<T>(), &model.setup, script, options, |f| {
        f.image.save_png(args.out_dir.join(format!("frame_{:04}.png", f.report.frame)))
    })?)
}
