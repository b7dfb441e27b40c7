//! `lsg`: render, stream, benchmark and generate desk-scale splat scenes.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lsg_core::desk;
use lsg_core::pipeline::{bench, render_sequence, stream, StreamConfig};
use lsg_core::ply::{load_ply, save_ply};
use lsg_core::preprocess::{IntersectionMode, RenderConfig, Stage2Form};
use lsg_core::scene::{
    generate_synthetic_scene, interpolate_trajectory, CameraPose, GaussianSet, TrajectoryFile,
    DEFAULT_FPS, DEFAULT_OMEGA_MAX, DEFAULT_V_MAX,
};
use lsg_core::scheduler::{Policy, SchedulerConfig};
use lsg_core::viewtrans::{WarpConfig, WarpMode};

#[derive(Parser)]
#[command(name = "lsg", version, about = "Streaming Gaussian splat renderer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fully render every pose of a trajectory.
    Render(RunArgs),
    /// Render with frame reuse: full frames every `window + 1` frames,
    /// warped frames with sparse re-rendering in between.
    Stream(RunArgs),
    /// Compare intersection modes, full versus streaming work, and
    /// scheduler policies.
    Bench(RunArgs),
    /// Write a synthetic scene and a camera trajectory.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

impl Toggle {
    fn on(self) -> bool {
        matches!(self, Toggle::On)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scene PLY. Without it the seeded desk scene is used.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Trajectory JSON. Without it the desk dolly of `--frames` poses is used.
    #[arg(long)]
    traj: Option<PathBuf>,
    /// Frames of the built-in trajectory.
    #[arg(long, default_value_t = 7)]
    frames: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Warped frames between full renders.
    #[arg(long, default_value_t = 5)]
    window: u32,
    #[arg(long, default_value = "two_stage")]
    intersection: IntersectionMode,
    #[arg(long, default_value = "conservative")]
    stage2: Stage2Form,
    #[arg(long, default_value = "ldu")]
    scheduler: Policy,
    #[arg(long, default_value_t = 16)]
    blocks: usize,
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    mask: Toggle,
    #[arg(long = "warp-mode", default_value = "tile")]
    warp_mode: WarpMode,
    /// Depth-bound culling of re-render tiles.
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    dpes: Toggle,
    /// Compare every frame against a full render.
    #[arg(long)]
    shadow: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Stats JSON path (default: OUT/stats.json).
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Also write PNG frames.
    #[arg(long)]
    png: bool,
    /// Also write raw f32 depth maps.
    #[arg(long)]
    depth: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneKind {
    /// Random cloud in front of a backdrop wall.
    Desk,
    /// Random cloud only.
    Cloud,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SceneKind::Desk)]
    kind: SceneKind,
    /// Splat count for `--kind cloud`.
    #[arg(long, default_value_t = desk::DESK_SPLATS)]
    count: usize,
    /// Cube side for `--kind cloud`.
    #[arg(long, default_value_t = desk::DESK_EXTENT)]
    extent: f64,
    /// Length of the dolly, in default-speed frames.
    #[arg(long, default_value_t = 7)]
    frames: usize,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    fps: f64,
    /// Speed cap in m/s.
    #[arg(long = "v-max", default_value_t = DEFAULT_V_MAX)]
    v_max: f64,
    /// Angular speed cap in degrees/s.
    #[arg(long = "omega-max", default_value_t = DEFAULT_OMEGA_MAX)]
    omega_max: f64,
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("LSG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .with_context(|| format!("LSG_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("failed to configure the worker pool")?;
    Ok(())
}

fn load_scene(args: &RunArgs) -> Result<GaussianSet> {
    match &args.scene {
        Some(path) => {
            load_ply(path).with_context(|| format!("cannot load scene {}", path.display()))
        }
        None => Ok(desk::desk_scene(args.seed)),
    }
}

fn load_poses(args: &RunArgs) -> Result<Vec<CameraPose>> {
    match &args.traj {
        Some(path) => {
            let file = TrajectoryFile::load(path)
                .with_context(|| format!("cannot load trajectory {}", path.display()))?;
            Ok(file.to_trajectory()?.poses)
        }
        None => Ok(desk::desk_trajectory(args.frames)?),
    }
}

fn stream_config(args: &RunArgs) -> Result<StreamConfig> {
    let render = RenderConfig {
        intersection_mode: args.intersection,
        stage2_form: args.stage2,
        ..Default::default()
    };
    render.validate()?;
    let scheduler = match args.scheduler {
        Policy::NaiveRoundRobin => SchedulerConfig::naive(args.blocks),
        Policy::Ldu => SchedulerConfig::ldu(args.blocks),
    };
    scheduler.validate()?;
    Ok(StreamConfig {
        render,
        warp: WarpConfig {
            window: args.window,
            mask_enabled: args.mask.on(),
            mode: args.warp_mode,
            ..Default::default()
        },
        scheduler,
        dpes: args.dpes.on(),
        shadow: args.shadow,
    })
}

fn stats_path(args: &RunArgs) -> PathBuf {
    args.stats
        .clone()
        .unwrap_or_else(|| args.out.join("stats.json"))
}

fn run_frames(args: &RunArgs, streaming: bool) -> Result<()> {
    let set = load_scene(args)?;
    let poses = load_poses(args)?;
    let cfg = stream_config(args)?;
    if streaming && poses.len() < args.window as usize + 1 {
        bail!(
            "trajectory has {} frames but --window {} needs at least {}",
            poses.len(),
            args.window,
            args.window + 1
        );
    }
    output::create_dir(&args.out)?;
    let opts = output::FrameOptions {
        png: args.png,
        depth: args.depth,
    };
    let sink =
        |t: usize, f: &lsg_core::raster::FrameBuffers| output::write_frame(&args.out, t, f, opts);
    let report = if streaming {
        stream(&set, &poses, &cfg, sink)?
    } else {
        render_sequence(&set, &poses, &cfg, sink)?
    };
    write_stats(args, &report.to_json()?)
}

fn write_stats(args: &RunArgs, json: &str) -> Result<()> {
    let path = stats_path(args);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        output::create_dir(parent)?;
    }
    Ok(output::write_text(&path, json)?)
}

fn run_bench(args: &RunArgs) -> Result<()> {
    let set = load_scene(args)?;
    let poses = load_poses(args)?;
    let cfg = stream_config(args)?;
    let report = bench(&set, &poses, &cfg)?;
    write_stats(args, &report.to_json()?)
}

fn run_gen(args: &GenArgs) -> Result<()> {
    output::create_dir(&args.out)?;
    let set = match args.kind {
        SceneKind::Desk => desk::desk_scene(args.seed),
        SceneKind::Cloud => generate_synthetic_scene(args.seed, args.count, args.extent),
    };
    let scene_path = args.out.join("scene.ply");
    save_ply(&set, &scene_path)
        .with_context(|| format!("cannot write {}", scene_path.display()))?;
    let span = DEFAULT_V_MAX / DEFAULT_FPS * args.frames.saturating_sub(1) as f64;
    let keys = desk::desk_keyposes(span);
    let poses = if args.frames <= 1 {
        vec![keys[0].clone()]
    } else {
        interpolate_trajectory(&keys, args.fps, args.v_max, args.omega_max)?.poses
    };
    let file = TrajectoryFile::from_poses(&poses, args.fps, args.v_max, args.omega_max);
    Ok(output::write_text(
        &args.out.join("traj.json"),
        &serde_json::to_string_pretty(&file)?,
    )?)
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Render(a) => run_frames(a, false),
        Command::Stream(a) => run_frames(a, true),
        Command::Bench(a) => run_bench(a),
        Command::Gen(a) => run_gen(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Causes already quoted by their parent's message are skipped.
            let mut parts: Vec<String> = Vec::new();
            for cause in e.chain() {
                let m = cause.to_string().replace('\n', " ");
                if !parts.last().is_some_and(|p| p.contains(&m)) {
                    parts.push(m);
                }
            }
            eprintln!("lsg: error: {}", parts.join(": "));
            ExitCode::FAILURE
        }
    }
}
