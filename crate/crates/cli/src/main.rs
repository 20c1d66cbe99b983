use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;
use twoview_sync::harness::{run_sweep, write_rows, SweepConfig};
use twoview_sync::io::{
    read_trajectories, split_cameras, write_trajectories, ModelReport, Scoring, SyncReport,
};
use twoview_sync::robust::{ransac_estimate, RansacError, RansacParams, SolverKind};
use twoview_sync::solvers::SolverOptions;
use twoview_sync::sync::{iterative_sync, IterParams, SyncError};
use twoview_sync::synth::{generate_scene, Motion, SceneSpec};

#[derive(Debug, Error)]
enum CliError {
    /// Bad input files, flags or configuration.
    #[error("{0}")]
    Input(String),
    /// The estimation ran but produced no result.
    #[error("{0}")]
    Algorithm(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Algorithm(_) => 2,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn with_path(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(
    name = "tvsync",
    version,
    about = "Joint two-view geometry and time shift estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the time shift and F or H between two cameras' tracks.
    Sync(SyncArgs),
    /// Generate a synthetic scene: a track CSV and a ground-truth JSON.
    Synth(SynthArgs),
    /// Run a grid of synthetic experiments and write a long-format CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum, serde::Serialize)]
enum ModelArg {
    F,
    H,
}

#[derive(Args, serde::Serialize)]
struct SyncArgs {
    /// Track CSV files (`camera_id,track_id,frame,u,v`); rows of all files
    /// are merged and must name exactly two cameras. The first camera to
    /// appear is camera 1.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "f")]
    model: ModelArg,
    /// Use the eight-point minimal F solver instead of the nine-point one.
    #[arg(long)]
    minimal: bool,
    /// Camera-2 frames per camera-1 frame.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    pmin: u32,
    #[arg(long, default_value_t = 5)]
    pmax: u32,
    #[arg(long, default_value_t = 20)]
    kmax: usize,
    /// Inlier threshold in pixels.
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    max_iterations: usize,
    /// Least-squares refit of the RANSAC winner on its inliers.
    #[arg(long)]
    refine: bool,
    /// Re-linearize at the winning shift before the final scoring.
    #[arg(long)]
    reanchor: bool,
    /// Largest shift a solver may return, relative to its linearization.
    #[arg(long)]
    beta_max: Option<f64>,
    /// One RANSAC run at secant length `--d` instead of the iterative search.
    #[arg(long)]
    single_shot: bool,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    d: i64,
    /// Camera-2 frame rate; adds the shift in seconds to the report.
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, serde::Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Pixel noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 10)]
    tracks: usize,
    /// Track lifetime in frames; 0 spans the whole sequence.
    #[arg(long, default_value_t = 60)]
    track_length: usize,
    #[arg(long, default_value_t = 8.0)]
    speed: f64,
    /// smooth-random, exact-linear-image, planar-smooth or
    /// exact-linear-planar.
    #[arg(long, default_value = "smooth-random")]
    motion: String,
    /// Fraction of camera-2 samples replaced by random points.
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    #[arg(long)]
    out_tracks: PathBuf,
    #[arg(long)]
    out_truth: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Also write the per-attempt logs of iterative runs.
    #[arg(long)]
    logs: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(with_path(path))
}

fn cmd_sync(args: &SyncArgs) -> Result<(), CliError> {
    let mut tracks = Vec::new();
    for path in &args.inputs {
        let file = File::open(path).map_err(with_path(path))?;
        let parsed = read_trajectories(BufReader::new(file))
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        tracks.extend(parsed);
    }
    let (cam1, cam2) = split_cameras(tracks).map_err(input)?;
    let kind = match (args.model, args.minimal) {
        (ModelArg::F, false) => SolverKind::FGep,
        (ModelArg::F, true) => SolverKind::FMin,
        (ModelArg::H, _) => SolverKind::HMin,
    };
    let ransac = RansacParams {
        threshold: args.threshold,
        max_iterations: args.max_iterations,
        seed: args.seed,
        d: args.d,
        rho: args.rho,
        refine: args.refine,
        reanchor: args.reanchor,
        solver: SolverOptions {
            beta_max: args.beta_max,
            ..SolverOptions::default()
        },
        ..RansacParams::default()
    };
    let config = serde_json::to_value(args).map_err(input)?;
    let fps = args.fps;
    let report = if args.single_shot {
        let r = ransac_estimate(&cam1, &cam2, kind, &ransac).map_err(|e| match e {
            RansacError::AllDegenerate => CliError::Algorithm(e.to_string()),
            e => input(e),
        })?;
        SyncReport {
            beta: r.best.beta,
            rho: args.rho,
            beta_seconds: fps.map(|f| r.best.beta / f),
            model: ModelReport::from_model(&r.best.model),
            inliers: r.inlier_count,
            total: r.total(),
            log: Vec::new(),
            seed: args.seed,
            scoring: Scoring {
                // re-anchoring moves the scored linearization
                beta0: r.correspondences.first().map_or(ransac.beta0, |c| c.beta0),
                d: ransac.d,
                threshold: ransac.threshold,
            },
            config,
        }
    } else {
        let params = IterParams {
            k_max: args.kmax,
            p_min: args.pmin,
            p_max: args.pmax,
            ransac,
            kind,
        };
        let run = iterative_sync(&cam1, &cam2, &params).map_err(|e| match e {
            SyncError::NeverImproved { .. } => CliError::Algorithm(e.to_string()),
            e => input(e),
        })?;
        SyncReport::from_run(&run, args.rho, args.threshold, args.seed, fps, config)
    };
    let mut out = create(&args.out)?;
    out.write_all(report.to_json().map_err(input)?.as_bytes())
        .and_then(|_| out.flush())
        .map_err(with_path(&args.out))
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let motion: Motion = serde_json::from_value(json!(args.motion))
        .map_err(|_| CliError::Input(format!("unknown motion `{}`", args.motion)))?;
    let spec = SceneSpec {
        seed: args.seed,
        n_frames: args.frames,
        n_tracks: args.tracks,
        beta_gt: args.beta,
        rho: args.rho,
        noise_sigma: args.noise,
        speed_px_per_frame: args.speed,
        motion,
        track_length: (args.track_length > 0).then_some(args.track_length),
        ..SceneSpec::default()
    };
    let mut scene = generate_scene(&spec).map_err(input)?;
    if args.outliers > 0.0 {
        scene = scene
            .with_outliers(args.outliers, args.seed ^ 0x6f75_746c)
            .map_err(input)?;
    }
    let mut out = create(&args.out_tracks)?;
    write_trajectories(&mut out, scene.cam1.iter().chain(&scene.cam2)).map_err(input)?;
    out.flush().map_err(with_path(&args.out_tracks))?;
    let truth = json!({ "spec": spec, "truth": scene.truth });
    let mut text = serde_json::to_string_pretty(&truth).map_err(input)?;
    text.push('\n');
    let mut out = create(&args.out_truth)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(with_path(&args.out_truth))
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(with_path(&args.config))?;
    let config: SweepConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("invalid sweep config: {e}")))?;
    let output = run_sweep(&config).map_err(input)?;
    write_rows(create(&args.out)?, &output.rows).map_err(input)?;
    if let Some(path) = &args.logs {
        write_rows(create(path)?, &output.logs).map_err(input)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // help and version print to stdout and succeed; usage errors are input errors
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Sync(a) => cmd_sync(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tvsync: {e}");
            ExitCode::from(e.code())
        }
    }
}
