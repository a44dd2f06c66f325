use std::path::PathBuf;

use clap::Args;
use liveview_core::eval::{evaluate, EvalSummary};

use crate::error::Result;
use crate::model::load_model;
use crate::report::table;
use crate::{Global, Precision};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Scene setup JSON; defaults to the one saved next to the checkpoint.
    #[arg(long)]
    pub setup: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub num_scenes: usize,
    /// Uniform plane counts to score (default: the trained count).
    #[arg(long, value_delimiter = ',')]
    pub planes: Vec<usize>,
    /// Also score K planes selected from `--keyframe-planes`.
    #[arg(long)]
    pub select_k: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub keyframe_planes: usize,
    /// CSV of per-row summaries.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full JSON summary including per-scene scores.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn run(args: &EvaluateArgs, global: &Global) -> Result<EvalSummary> {
    let model = load_model(&args.checkpoint, args.setup.as_deref())?;
    let planes = if args.planes.is_empty() { vec![model.setup.planes] } else { args.planes.clone() };
    let select = args.select_k.map(|k| (args.keyframe_planes, k));
    let summary = match global.precision {
        Precision::F32 => evaluate(&model.net, &model.setup, args.num_scenes, global.seed, &planes, select)?,
        Precision::F64 => evaluate(&model.net.cast::<f64>(), &model.setup, args.num_scenes, global.seed, &planes, select)?,
    };
    let rows: Vec<Vec<String>> = summary
        .rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                r.planes.to_string(),
                format!("{:.3}", r.psnr.mean),
                format!("{:.3}", r.psnr.std),
                format!("{:.3}", r.psnr.median),
                format!("{:.4}", r.ssim.mean),
                format!("{:.4}", r.ssim.std),
            ]
        })
        .collect();
    let header = ["config", "planes", "psnr_mean", "psnr_std", "psnr_median", "ssim_mean", "ssim_std"];
    print!("{}", table(&header, &rows));
    if let Some(p) = &args.out {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(header)?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    if let Some(p) = &args.json {
        std::fs::write(p, serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(summary)
}
