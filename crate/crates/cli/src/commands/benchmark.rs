use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use liveview_core::eval::Stats;
use liveview_core::metrics::{psnr, ssim};
use liveview_core::net::{opx_count, Centering, Network, OpCounting, PlaneContext};
use liveview_core::synth::Synthesizer;
use liveview_core::train::{held_out_seed, TrainConfig};
use liveview_tensor::Scalar;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::inputs::uniform_planes;
use crate::model::load_model;
use crate::report::table;
use crate::{Global, Precision};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BenchMode {
    DynamicTarget,
    StaticTarget,
    DynamicInput,
    StaticInput,
}

impl BenchMode {
    pub const ALL: [BenchMode; 4] =
        [Self::DynamicTarget, Self::StaticTarget, Self::DynamicInput, Self::StaticInput];

    pub fn name(self) -> &'static str {
        match self {
            Self::DynamicTarget => "dynamic_target",
            Self::StaticTarget => "static_target",
            Self::DynamicInput => "dynamic_input",
            Self::StaticInput => "static_input",
        }
    }

    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s:?}; expected one of dynamic_target, static_target, dynamic_input, static_input"))
    }

    pub fn of(centering: Centering, context: PlaneContext) -> Self {
        match (context, centering) {
            (PlaneContext::Dynamic, Centering::Target) => Self::DynamicTarget,
            (PlaneContext::Static, Centering::Target) => Self::StaticTarget,
            (PlaneContext::Dynamic, Centering::Input) => Self::DynamicInput,
            (PlaneContext::Static, Centering::Input) => Self::StaticInput,
        }
    }

    pub fn centering(self) -> Centering {
        match self {
            Self::DynamicTarget | Self::StaticTarget => Centering::Target,
            _ => Centering::Input,
        }
    }

    pub fn context(self) -> PlaneContext {
        match self {
            Self::DynamicTarget | Self::DynamicInput => PlaneContext::Dynamic,
            _ => PlaneContext::Static,
        }
    }
}

impl std::fmt::Display for BenchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn parse_mode_checkpoint(s: &str) -> std::result::Result<(BenchMode, PathBuf), String> {
    let (mode, path) = s.split_once('=').ok_or("expected MODE=PATH")?;
    Ok((BenchMode::parse(mode)?, PathBuf::from(path)))
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub setup: Option<PathBuf>,
    /// Checkpoints for other modes, as `MODE=PATH`; modes without one are
    /// timed with freshly initialized weights.
    #[arg(long = "mode-checkpoint", value_parser = parse_mode_checkpoint)]
    pub mode_checkpoints: Vec<(BenchMode, PathBuf)>,
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64])]
    pub plane_counts: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_parser = BenchMode::parse,
          default_value = "dynamic_target,static_target,dynamic_input,static_input")]
    pub modes: Vec<BenchMode>,
    /// Timed runs per row, after `--warmup` untimed ones.
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long, default_value_t = 2)]
    pub warmup: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mode: String,
    pub views: usize,
    pub planes: usize,
    pub wall_ms_mean: f64,
    pub wall_ms_std: f64,
    pub opx: f64,
    pub psnr: f64,
    pub ssim: f64,
    /// Plane count the network was trained with (0 when untrained).
    pub trained_planes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, mode: BenchMode, planes: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.mode == mode.name() && r.planes == planes)
    }
}

/// Times full synthesis (HWV, network, blending and compositing) of one
/// held-out target for every `(mode, plane count)` pair.
pub fn benchmark<T: Scalar>(
    nets: &BTreeMap<BenchMode, Network<f32>>,
    setup: &TrainConfig,
    scene_seed: u64,
    plane_counts: &[usize],
    runs: usize,
    warmup: usize,
) -> Result<BenchReport> {
    if runs < 5 {
        return usage("at least 5 timed runs are required");
    }
    let ex = setup.example::<T>(held_out_seed(scene_seed, 0))?;
    let reference = setup.rig()?.reference_index();
    let mut rows = Vec::new();
    for (&mode, net) in nets {
        let synth = Synthesizer::new(net.cast::<T>(), ex.inputs.clone(), ex.cameras.clone(), reference)?;
        for &d in plane_counts {
            let planes = uniform_planes(setup, d)?;
            for _ in 0..warmup {
                synth.render(&ex.target_camera, &planes)?;
            }
            let mut times = Vec::with_capacity(runs);
            let mut last = None;
            for _ in 0..runs {
                let t = Instant::now();
                let r = synth.render(&ex.target_camera, &planes)?;
                times.push(t.elapsed().as_secs_f64() * 1e3);
                last = Some(r);
            }
            let image = last.expect("runs >= 5").image;
            let stats = Stats::of(&times);
            rows.push(BenchRow {
                mode: mode.name().into(),
                views: net.config().num_views,
                planes: d,
                wall_ms_mean: stats.mean,
                wall_ms_std: stats.std,
                opx: opx_count(net.config(), d, setup.height, setup.width, OpCounting::default()),
                psnr: psnr(&image, &ex.target)?,
                ssim: ssim(&image, &ex.target)?,
                trained_planes: net.trained_planes(),
            });
        }
    }
    Ok(BenchReport { rows })
}

pub fn run(args: &BenchmarkArgs, global: &Global) -> Result<BenchReport> {
    let model = load_model(&args.checkpoint, args.setup.as_deref())?;
    let primary = BenchMode::of(model.setup.centering, model.setup.context);
    let mut nets = BTreeMap::new();
    for &mode in &args.modes {
        let net = if mode == primary {
            model.net.clone()
        } else if let Some((_, p)) = args.mode_checkpoints.iter().find(|(m, _)| *m == mode) {
            let net = Network::<f32>::load(p)?;
            if BenchMode::of(net.config().centering, net.config().context) != mode {
                return usage(format!("{} is not a {mode} checkpoint", p.display()));
            }
            net
        } else {
            let config = model.net.config().with_centering(mode.centering()).with_context(mode.context());
            Network::init(config, global.seed)?
        };
        nets.insert(mode, net);
    }
    let report = match global.precision {
        Precision::F32 => benchmark::<f32>(&nets, &model.setup, args.scene_seed, &args.plane_counts, args.runs, args.warmup)?,
        Precision::F64 => benchmark::<f64>(&nets, &model.setup, args.scene_seed, &args.plane_counts, args.runs, args.warmup)?,
    };
    let header = ["mode", "V", "D", "wall_ms_mean", "wall_ms_std", "opx", "psnr", "ssim", "trained_planes"];
    let cells: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.mode.clone(),
                r.views.to_string(),
                r.planes.to_string(),
                format!("{:.2}", r.wall_ms_mean),
                format!("{:.2}", r.wall_ms_std),
                format!("{:.0}", r.opx),
                format!("{:.3}", r.psnr),
                format!("{:.4}", r.ssim),
                r.trained_planes.to_string(),
            ]
        })
        .collect();
    print!("{}", table(&header, &cells));
    if let Some(p) = &args.out {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(header)?;
        for c in &cells {
            w.write_record(c)?;
        }
        w.flush()?;
    }
    Ok(report)
}
