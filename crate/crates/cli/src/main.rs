use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use motionopt::constraints::LossWeights;
use motionopt::io::{self, Scene};
use motionopt::motion::{BodyModel, Human, MotionSequence};
use motionopt::optimizer::{finite_diff_check, OptimReport, Problem};
use motionopt::pipeline::{self, RunConfig};
use motionopt::{Error, Result};

/// Object-aware human motion refinement.
#[derive(Parser)]
#[command(name = "motionopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON). Defaults apply to every missing field.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scene file (JSON). Defaults to the built-in desk scene.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Body model file (JSON). Defaults to the built-in rig.
    #[arg(long)]
    body: Option<PathBuf>,
    /// Overrides the optimizer seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a root trajectory for the scene.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Never contact the external planner.
        #[arg(long)]
        offline: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine a motion against the scene and write an optimization report.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        plan: PathBuf,
        /// Initial motion; defaults to a rest pose following the plan.
        #[arg(long)]
        motion: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute motion metrics.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Motion file or optimization report.
        #[arg(long)]
        motion: PathBuf,
        /// Pose encoder (JSON); defaults to the identity encoder.
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render one frame as PNG, or PPM if the output ends in `.ppm`.
    Render {
        #[command(flatten)]
        common: Common,
        /// Motion file or optimization report.
        #[arg(long)]
        motion: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        motion: Option<PathBuf>,
        /// Number of coordinates to probe.
        #[arg(long, default_value_t = 64)]
        coordinates: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Context {
    config: RunConfig,
    scene: Scene,
    human: Human,
}

fn context(common: &Common) -> Result<Context> {
    let mut config = match &common.config {
        Some(p) => io::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.optimizer.seed = seed;
    }
    let scene = match &common.scene {
        Some(p) => Scene::load(p)?,
        None => Scene::desk(2000, 0)?,
    };
    let body = match &common.body {
        Some(p) => io::load_body(p)?,
        None => BodyModel::desk_rig(),
    };
    Ok(Context {
        config,
        scene,
        human: Human::with_surface_points(body)?,
    })
}

/// A motion file, or the final motion of an optimization report.
fn load_motion(path: &Path) -> Result<MotionSequence> {
    match io::load::<OptimReport>(path) {
        Ok(report) => {
            report.motion.validate()?;
            Ok(report.motion)
        }
        Err(_) => io::load_motion(path),
    }
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Plan { common, offline, out } => {
            let ctx = context(&common)?;
            let plan = pipeline::plan_scene(&ctx.scene, &ctx.config, offline)?;
            io::save(&out, &plan)?;
            Ok(format!(
                "plan: {} waypoints, {} frames, source {:?}",
                plan.waypoints.len(),
                plan.frames.len(),
                plan.source
            ))
        }
        Command::Optimize {
            common,
            plan,
            motion,
            out,
        } => {
            let ctx = context(&common)?;
            let plan = io::load_plan(&plan)?;
            let init = motion.as_deref().map(load_motion).transpose()?;
            let report = pipeline::optimize_scene(&ctx.scene, &plan, &ctx.human, &ctx.config, init.as_ref())?;
            io::save(&out, &report)?;
            let last = report.records.last().expect("at least one iteration");
            Ok(format!(
                "optimize: {} iterations, objective {:.6e}, gradient norm {:.3e}",
                report.records.len(),
                last.components.total,
                last.grad_norm
            ))
        }
        Command::Eval {
            common,
            motion,
            encoder,
            out,
        } => {
            let ctx = context(&common)?;
            let motion = load_motion(&motion)?;
            let encoder = encoder.as_deref().map(io::load_encoder).transpose()?;
            let metrics = pipeline::evaluate(&motion, &ctx.human, encoder.as_ref())?;
            io::save(&out, &metrics)?;
            Ok(format!(
                "eval: plausibility {:.6}, variation {:.6}, trajectory length {:.6} m",
                metrics.pose_plausibility, metrics.pose_variation, metrics.trajectory_length
            ))
        }
        Command::Render {
            common,
            motion,
            frame,
            out,
        } => {
            let ctx = context(&common)?;
            let motion = load_motion(&motion)?;
            let image = pipeline::render_motion_frame(&motion, frame, &ctx.human, &ctx.scene, &ctx.config.render)?;
            image.save(&out)?;
            Ok(format!("render: {}x{} -> {}", image.width, image.height, out.display()))
        }
        Command::Gradcheck {
            common,
            plan,
            motion,
            coordinates,
            out,
        } => {
            let ctx = context(&common)?;
            let plan = io::load_plan(&plan)?;
            let motion = match motion {
                Some(p) => load_motion(&p)?,
                None => motionopt::planner::initial_motion(&plan, ctx.human.body.pose_joints())?,
            };
            let problem = Problem::new(&ctx.human, &ctx.scene.objects, &plan.frames, motion.fps);
            // the sampled prior has no scalar value to difference
            let weights = LossWeights {
                prior: 0.0,
                ..ctx.config.optimizer.weights
            };
            let check = finite_diff_check(&problem, &motion.to_flat(), &weights, coordinates, ctx.config.optimizer.seed)?;
            if let Some(out) = out {
                io::save(&out, &check)?;
            }
            Ok(format!(
                "gradcheck: max relative error {:.3e} over {} coordinates",
                check.max_rel_error,
                check.coordinates.len()
            ))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        1
    } else {
        2
    }
}
