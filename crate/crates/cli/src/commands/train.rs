use std::path::PathBuf;

use clap::Args;
use liveview_core::net::{Centering, HeadMode, PlaneContext};
use liveview_core::scene::RigKind;
use liveview_core::train::{self, LossKind, TrainConfig};

use crate::error::Result;
use crate::{Global, Precision};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory for the checkpoint, config and CSV log.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Start from this JSON config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub planes: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub focal: Option<f64>,
    #[arg(long, value_parser = parse_rig)]
    pub rig: Option<RigKind>,
    #[arg(long)]
    pub baseline: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_parser = ["l1", "l2"])]
    pub loss: Option<String>,
    #[arg(long, value_parser = ["softmax_v", "paper_vminus1"])]
    pub head: Option<String>,
    #[arg(long, value_parser = ["target", "input"])]
    pub centering: Option<String>,
    #[arg(long, value_parser = ["dynamic", "static"])]
    pub context: Option<String>,
    #[arg(long)]
    pub val_every: Option<usize>,
}

pub(crate) fn parse_rig(s: &str) -> std::result::Result<RigKind, String> {
    RigKind::parse(s).map_err(|e| e.to_string())
}

impl TrainArgs {
    pub fn resolve(&self, seed: u64) -> Result<TrainConfig> {
        let mut c = match &self.config {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => TrainConfig::default(),
        };
        c.seed = seed;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(iterations, planes, width, height, focal, rig, baseline, lr, val_every);
        if let Some(l) = &self.loss {
            c.loss = if l == "l1" { LossKind::L1 } else { LossKind::L2 };
        }
        if let Some(h) = &self.head {
            c.head_mode = if h == "softmax_v" { HeadMode::SoftmaxV } else { HeadMode::PaperVminus1 };
        }
        if let Some(m) = &self.centering {
            c.centering = if m == "target" { Centering::Target } else { Centering::Input };
        }
        if let Some(m) = &self.context {
            c.context = if m == "dynamic" { PlaneContext::Dynamic } else { PlaneContext::Static };
        }
        c.validate()?;
        Ok(c)
    }
}

pub fn run(args: &TrainArgs, global: &Global) -> Result<()> {
    let config = args.resolve(global.seed)?;
    tracing::info!(fingerprint = %config.fingerprint(), iterations = config.iterations, "training");
    let records = match global.precision {
        Precision::F32 => train::train::<f32>(&config, Some(&args.out_dir))?.1,
        Precision::F64 => train::train::<f64>(&config, Some(&args.out_dir))?.1,
    };
    if let Some(last) = records.last() {
        println!(
            "trained {} iterations, final loss {:.5}, {:.1} s; checkpoint at {}",
            last.iteration,
            last.loss,
            last.wall_ms / 1e3,
            train::checkpoint_path(&args.out_dir).display()
        );
    }
    Ok(())
}
