mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use commands::Failure;

#[derive(Debug, Parser)]
#[command(name = "derender", version, about = "Fit, render, edit and benchmark de-rendered scenes")]
pub struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker thread cap; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Scene file read by render, fit and edit.
    #[arg(long, global = true)]
    pub scene: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hard and soft render layers of a scene.
    Render(RenderArgs),
    /// Fit every object of an initial scene to per-object masks.
    Fit(FitArgs),
    /// Apply an edit script to a scene.
    Edit(EditArgs),
    /// Ablation benchmark on synthetic scenes.
    Bench(BenchArgs),
    /// Analytic vs finite-difference silhouette gradients.
    Gradcheck(GradcheckArgs),
    /// Run the HTTP edit service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Comma-separated: instance, depth, normal, pose, silhouette, masks.
    #[arg(long, default_value = "instance,depth,normal,pose")]
    pub layers: String,
    #[arg(long, default_value_t = 1.0)]
    pub sharpness: f64,
}

#[derive(Debug, Args)]
pub struct FitFlags {
    #[arg(long, default_value_t = 64)]
    pub iterations: u32,
    #[arg(long, default_value_t = 0.03)]
    pub lr: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sharpness: f64,
    /// Comma-separated subset of scale, yaw, offset_e, log_tau, ffd.
    #[arg(long)]
    pub free: Option<String>,
    /// Full quaternion instead of yaw only.
    #[arg(long)]
    pub no_yaw_constraint: bool,
    /// Optimize log t instead of log τ.
    #[arg(long)]
    pub no_normalized_distance: bool,
    /// Keep mesh 0 with the lattice frozen.
    #[arg(long)]
    pub no_multicad: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Directory holding `<object id>.png` masks.
    #[arg(long)]
    pub masks: PathBuf,
    /// Fit each object's initial mesh instead of searching the library.
    #[arg(long)]
    pub keep_mesh: bool,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    /// JSON array of edit operations.
    #[arg(long)]
    pub script: PathBuf,
    /// Also write before/ and after/ render layers into this directory.
    #[arg(long)]
    pub render: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Number of scenes, seeded from --seed upwards.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    /// Comma-separated configs: full, no-quaternion, no-tau, no-multicad, or their table labels.
    #[arg(long, default_value = "full,no-quaternion,no-tau,no-multicad")]
    pub configs: String,
    #[arg(long, default_value = "hard")]
    pub difficulty: String,
    #[arg(long, default_value_t = 64)]
    pub iterations: u32,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub meshes: u64,
    #[arg(long, default_value_t = 24, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[arg(long, default_value_t = 1.0)]
    pub sharpness: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0.95)]
    pub min_pass_rate: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = derender_service::DEFAULT_PORT)]
    pub port: u16,
    /// Directory that scene `mesh_lib` paths resolve under.
    #[arg(long)]
    pub mesh_root: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(Failure::BAD_CONFIG);
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
