//! `liveview` command-line tool: training, evaluation, synthesis,
//! benchmarking and video rendering.

pub mod commands;
pub mod error;
pub mod inputs;
pub mod model;
pub mod report;

use clap::{Parser, Subcommand, ValueEnum};

pub use error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

/// Flags shared by every command.
#[derive(Clone, Debug, clap::Args)]
pub struct Global {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for plane-parallel work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,
}

#[derive(Debug, Parser)]
#[command(name = "liveview", version, about = "Target-centred MPI view synthesis")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network on procedural scenes.
    Train(commands::train::TrainArgs),
    /// Score a checkpoint on held-out scenes.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Render one novel view.
    Synthesize(commands::synthesize::SynthesizeArgs),
    /// Time synthesis per mode and plane count.
    Benchmark(commands::benchmark::BenchmarkArgs),
    /// Render a scripted video with amortized plane selection.
    Video(commands::video::VideoArgs),
    /// Write a procedural scene with its input views and cameras.
    SceneExport(commands::scene_export::SceneExportArgs),
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match &cli.command {
        Command::Train(a) => commands::train::run(a, &cli.global),
        Command::Evaluate(a) => commands::evaluate::run(a, &cli.global).map(|_| ()),
        Command::Synthesize(a) => commands::synthesize::run(a, &cli.global).map(|_| ()),
        Command::Benchmark(a) => commands::benchmark::run(a, &cli.global).map(|_| ()),
        Command::Video(a) => commands::video::run(a, &cli.global).map(|_| ()),
        Command::SceneExport(a) => commands::scene_export::run(a, &cli.global),
    }
}
