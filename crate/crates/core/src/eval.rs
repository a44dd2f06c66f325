//! Held-out evaluation against ground truth and the nearest-view baseline.

use liveview_tensor::Scalar;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::geometry::{Camera, PlaneSet};
use crate::metrics::{psnr, ssim};
use crate::mpi::{select_planes, PlaneSelection};
use crate::net::Network;
use crate::scene::Example;
use crate::synth::{nearest_view, Rendering, Synthesizer};
use crate::train::{held_out_seed, TrainConfig};

/// Mean, sample standard deviation and median of a list of values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, median: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Self { mean, std, median }
    }
}

/// One configuration's scores over the held-out set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub label: String,
    /// Planes actually composited (0 for the baseline).
    pub planes: usize,
    pub psnr: Stats,
    pub ssim: Stats,
    pub per_scene_psnr: Vec<f64>,
    pub per_scene_ssim: Vec<f64>,
}

impl EvalRow {
    fn new(label: String, planes: usize, psnr_values: Vec<f64>, ssim_values: Vec<f64>) -> Self {
        Self {
            label,
            planes,
            psnr: Stats::of(&psnr_values),
            ssim: Stats::of(&ssim_values),
            per_scene_psnr: psnr_values,
            per_scene_ssim: ssim_values,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub num_scenes: usize,
    pub seed: u64,
    pub rows: Vec<EvalRow>,
}

impl EvalSummary {
    pub fn row(&self, label: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

/// Held-out examples rendered under the scene setup of `config`.
pub fn held_out_examples<T: Scalar>(config: &TrainConfig, num_scenes: usize, seed: u64) -> Result<Vec<Example<T>>> {
    (0..num_scenes).map(|i| config.example(held_out_seed(seed, i))).collect()
}

/// Full-D rendering, the top-K selection from its alphas, and the
/// rendering with only the selected planes.
pub struct SelectedRendering<T> {
    pub full: Rendering<T>,
    pub selection: PlaneSelection,
    pub selected_planes: PlaneSet,
    pub selected: Rendering<T>,
}

pub fn render_with_selection<T: Scalar>(
    synth: &Synthesizer<T>,
    target: &Camera,
    planes: &PlaneSet,
    k: usize,
) -> Result<SelectedRendering<T>> {
    let full = synth.render(target, planes)?;
    let selection = select_planes(&full.alpha, k)?;
    let selected_planes = planes.subset(&selection.indices)?;
    let selected = synth.render(target, &selected_planes)?;
    Ok(SelectedRendering { full, selection, selected_planes, selected })
}

/// Scores `net` on `num_scenes` held-out scenes: the nearest-input-view
/// baseline, each uniform plane count, and optionally K planes selected
/// from `select.0` uniform planes.
pub fn evaluate<T: Scalar>(
    net: &Network<T>,
    config: &TrainConfig,
    num_scenes: usize,
    seed: u64,
    plane_counts: &[usize],
    select: Option<(usize, usize)>,
) -> Result<EvalSummary> {
    if net.config().num_views != config.rig.num_views() {
        return contract(format!(
            "checkpoint has {} views but the {:?} rig has {}",
            net.config().num_views,
            config.rig,
            config.rig.num_views()
        ));
    }
    let examples = held_out_examples::<T>(config, num_scenes, seed)?;
    let reference = config.rig()?.reference_index();
    let uniform: Vec<(usize, PlaneSet)> = plane_counts
        .iter()
        .map(|&d| Ok((d, crate::geometry::equidisparity_planes(config.z_near, config.z_far, d)?)))
        .collect::<Result<_>>()?;
    let selection_planes = select
        .map(|(d, _)| crate::geometry::equidisparity_planes(config.z_near, config.z_far, d))
        .transpose()?;

    let mut baseline = (Vec::new(), Vec::new());
    let mut per_count = vec![(Vec::new(), Vec::new()); uniform.len()];
    let mut selected = (Vec::new(), Vec::new());
    for ex in &examples {
        let near = &ex.inputs[nearest_view(&ex.cameras, &ex.target_camera)];
        baseline.0.push(psnr(near, &ex.target)?);
        baseline.1.push(ssim(near, &ex.target)?);
        let synth = Synthesizer::new(net.clone(), ex.inputs.clone(), ex.cameras.clone(), reference)?;
        for ((_, planes), acc) in uniform.iter().zip(&mut per_count) {
            let r = synth.render(&ex.target_camera, planes)?;
            acc.0.push(psnr(&r.image, &ex.target)?);
            acc.1.push(ssim(&r.image, &ex.target)?);
        }
        if let (Some((_, k)), Some(planes)) = (select, &selection_planes) {
            let r = render_with_selection(&synth, &ex.target_camera, planes, k)?;
            selected.0.push(psnr(&r.selected.image, &ex.target)?);
            selected.1.push(ssim(&r.selected.image, &ex.target)?);
        }
    }

    let mut rows = vec![EvalRow::new("nearest_view".into(), 0, baseline.0, baseline.1)];
    for ((d, _), (p, s)) in uniform.iter().zip(per_count) {
        rows.push(EvalRow::new(format!("uniform_{d}"), *d, p, s));
    }
    if let Some((d, k)) = select {
        rows.push(EvalRow::new(format!("select_{k}_of_{d}"), k.min(d), selected.0, selected.1));
    }
    Ok(EvalSummary { num_scenes, seed, rows })
}
