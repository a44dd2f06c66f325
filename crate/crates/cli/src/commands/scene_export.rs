use std::path::PathBuf;

use clap::Args;
use liveview_core::geometry::CameraFile;
use liveview_core::scene::{generate_scene, make_example};
use liveview_core::train::{held_out_seed, TrainConfig};

use crate::error::Result;
use crate::inputs::parse_pose;
use crate::Global;

#[derive(Debug, Args)]
pub struct SceneExportArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Scene setup JSON (defaults to the training defaults).
    #[arg(long)]
    pub setup: Option<PathBuf>,
    /// Index within the held-out range selected by `--seed`.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Target centre; a random pose inside the rig when omitted.
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub target_pose: Option<[f64; 3]>,
}

/// Writes `scene/` (for `--scene`), `view_N.png`, `cameras.json` with the
/// target, and the ground-truth `target.png`.
pub fn run(args: &SceneExportArgs, global: &Global) -> Result<()> {
    let setup: TrainConfig = match &args.setup {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    let seed = held_out_seed(global.seed, args.index);
    let scene = generate_scene(seed, &setup.scene_config()?);
    let rig = setup.rig()?;
    let mut ex = make_example::<f32>(&scene, &rig, setup.jitter, seed);
    if let Some([x, y, z]) = args.target_pose {
        ex = liveview_core::scene::example_for_target(&scene, &rig, rig.camera_at(x, y, z));
    }
    std::fs::create_dir_all(&args.out_dir)?;
    scene.save(args.out_dir.join("scene"))?;
    for (i, v) in ex.inputs.iter().enumerate() {
        v.save_png(args.out_dir.join(format!("view_{i}.png")))?;
    }
    ex.target.save_png(args.out_dir.join("target.png"))?;
    CameraFile::new(&ex.cameras, Some(&ex.target_camera)).save(args.out_dir.join("cameras.json"))?;
    std::fs::write(args.out_dir.join("setup.json"), serde_json::to_string_pretty(&setup)?)?;
    println!("exported scene with {} quads to {}", scene.quads.len(), args.out_dir.display());
    Ok(())
}
