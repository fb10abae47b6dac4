//! The `iritrack` command line.

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use iritrack_core::decision::{evaluate, FaceBoxTrace};
use iritrack_core::iris::{darkest_blob_roi, daugman_locate, track_frames, Frame, FrameManifest, IrisError, LocatorConfig, RegionOfInterest, RoiPlan};
use iritrack_core::pattern::{generate_pattern, Pattern, PatternError, Screen};
use iritrack_core::simulator::{calibrate_turn_error, run_benchmark, AttackMix, BenchmarkConfig};
use iritrack_core::trajectory::Trajectory;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::config::EngineConfig;
use crate::http::router;
use crate::service::{LivenessService, SystemClock};
use crate::store::SessionStore;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Generation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Generation(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "iritrack", version, about = "Iris-trajectory liveness checks")]
pub struct Cli {
    /// JSON engine config; defaults to $IRITRACK_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a challenge pattern.
    Generate(GenerateArgs),
    /// Judge a recorded trajectory, or a frame sequence, against a pattern.
    Evaluate(EvaluateArgs),
    /// Locate the iris in one PGM image.
    Locate(LocateArgs),
    /// Run a labelled benchmark of genuine and attack trials.
    Simulate(SimulateArgs),
    /// Serve the session API.
    Serve(ServeArgs),
    /// Fit the genuine noise model to a target mean angular deviation.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenSize(pub Screen);

impl FromStr for ScreenSize {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad dimension {v:?}: {e}"));
        Ok(ScreenSize(Screen {
            width: parse(w)?,
            height: parse(h)?,
        }))
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Random if omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub screen: Option<ScreenSize>,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pattern: PathBuf,
    #[arg(long, conflicts_with = "frames", required_unless_present = "frames")]
    pub trajectory: Option<PathBuf>,
    /// Directory holding manifest.json and its PGM frames.
    #[arg(long, requires = "roi")]
    pub frames: Option<PathBuf>,
    /// Search window for every frame, as x,y,w,h.
    #[arg(long)]
    pub roi: Option<RegionOfInterest>,
    #[arg(long)]
    pub face_trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LocateArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Search window as x,y,w,h; a darkest-blob guess if omitted.
    #[arg(long)]
    pub roi: Option<RegionOfInterest>,
    #[arg(long)]
    pub rmin: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    /// Search every candidate centre instead of coarse-to-fine.
    #[arg(long)]
    pub exhaustive: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub attack_mix: Option<AttackMix>,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write every trial record here as JSON.
    #[arg(long)]
    pub trials_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    #[arg(long)]
    pub state_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 20.0)]
    pub target: f64,
    #[arg(long, default_value_t = 0.25)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write the engine config with the fitted noise model here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    match out {
        Some(p) => fs::write(p, json + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn generate(cfg: &EngineConfig, args: &GenerateArgs) -> Result<(), CliError> {
    let mut pattern_cfg = cfg.pattern.clone();
    if let Some(ScreenSize(screen)) = args.screen {
        pattern_cfg.screen = screen;
    }
    pattern_cfg.validate().map_err(invalid)?;
    let seed = args.seed.unwrap_or_else(rand::random);
    let pattern = generate_pattern(&pattern_cfg, seed).map_err(|e| match e {
        PatternError::GenerationFailed { .. } => CliError::Generation(e.to_string()),
        other => invalid(other),
    })?;
    emit(&pattern, args.out.as_deref())
}

fn evaluate_cmd(cfg: &EngineConfig, args: &EvaluateArgs) -> Result<(), CliError> {
    let pattern: Pattern = read_json(&args.pattern)?;
    let violations = pattern.violations(&cfg.pattern);
    if pattern.angles.len() + 2 != pattern.dots.len() || pattern.segment_lengths.len() + 1 != pattern.dots.len() {
        return Err(invalid(format!("inconsistent pattern: {}", violations.join("; "))));
    }
    let face: Option<FaceBoxTrace> = args.face_trace.as_deref().map(read_json).transpose()?;
    let traj = match (&args.trajectory, &args.frames, args.roi) {
        (Some(path), _, _) => read_json::<Trajectory>(path)?,
        (None, Some(dir), Some(roi)) => {
            let manifest = FrameManifest::load(&dir.join("manifest.json")).map_err(invalid)?;
            let frames = manifest.read_frames(dir).map_err(invalid)?;
            match track_frames(&frames, &RoiPlan::Fixed(roi), &cfg.tracking) {
                Ok(points) => Trajectory::new(points).map_err(invalid)?,
                Err(IrisError::InsufficientEvidence { have, need }) => {
                    let v = iritrack_core::decision::Verdict::reject(
                        iritrack_core::decision::Reason::InsufficientEvidence,
                        format!("{have} usable frames, need {need}"),
                    );
                    return emit(&v, None);
                }
                Err(e) => return Err(invalid(e)),
            }
        }
        _ => return Err(invalid("give --trajectory, or --frames with --roi")),
    };
    emit(&evaluate(&pattern, &traj, face.as_ref(), None, &cfg.decision), None)
}

fn locate(cfg: &EngineConfig, args: &LocateArgs) -> Result<(), CliError> {
    let frame = Frame::read_pgm(&args.image, 0.0).map_err(invalid)?;
    let base = &cfg.tracking.locator;
    let locator = LocatorConfig {
        r_min: args.rmin.unwrap_or(base.r_min),
        r_max: args.rmax.unwrap_or(base.r_max),
        exhaustive: args.exhaustive || base.exhaustive,
        ..base.clone()
    };
    let roi = args
        .roi
        .unwrap_or_else(|| darkest_blob_roi(&frame, (4.0 * locator.r_max).ceil() as u32));
    let fix = daugman_locate(&frame, &roi, &locator).map_err(invalid)?;
    emit(&fix, None)
}

fn simulate(cfg: &EngineConfig, args: &SimulateArgs) -> Result<(), CliError> {
    let bench = BenchmarkConfig {
        trials: args.trials,
        seed: args.seed,
        mix: args.attack_mix.unwrap_or_default(),
        noise: cfg.noise.clone(),
        pattern: cfg.pattern.clone(),
        decision: cfg.decision.clone(),
        replay: cfg.replay.clone(),
        photo: cfg.photo.clone(),
    };
    let outcome = run_benchmark(&bench).map_err(|e| match e {
        iritrack_core::simulator::SimError::Pattern(PatternError::GenerationFailed { .. }) => {
            CliError::Generation(e.to_string())
        }
        other => invalid(other),
    })?;
    print!("{}", outcome.report.to_table());
    if let Some(p) = &args.report {
        emit(&outcome.report, Some(p))?;
    }
    if let Some(p) = &args.trials_out {
        emit(&outcome.trials, Some(p))?;
    }
    Ok(())
}

fn calibrate(cfg: &EngineConfig, args: &CalibrateArgs) -> Result<(), CliError> {
    let (noise, stats) = calibrate_turn_error(
        &cfg.pattern,
        &cfg.noise,
        &cfg.decision,
        args.target,
        args.tolerance,
        args.runs,
        args.seed,
    )
    .map_err(invalid)?;
    let per: Vec<String> = stats.per_angle.iter().map(|(a, d)| format!("{a}:{d:.1}")).collect();
    println!(
        "turn_error_deg {:.1}: mean deviation {:.2} deg over {} runs, pass rate {:.3}, per angle {}",
        noise.turn_error_deg,
        stats.mean_deg,
        stats.measured_runs,
        stats.pass_rate,
        per.join(" ")
    );
    if let Some(p) = &args.out {
        let fitted = EngineConfig {
            noise,
            ..cfg.clone()
        };
        emit(&fitted, Some(p))?;
    }
    Ok(())
}

fn serve(cfg: EngineConfig, args: &ServeArgs) -> Result<(), CliError> {
    let store = SessionStore::open(&args.state_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    let service = Arc::new(LivenessService::new(store, cfg, Arc::new(SystemClock)));
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Runtime(format!("bind {addr}: {e}")))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?);
        axum::serve(listener, router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Runtime(e.to_string()))
    })
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = EngineConfig::resolve(cli.config.as_deref()).map_err(invalid)?;
    match &cli.command {
        Command::Generate(a) => generate(&cfg, a),
        Command::Evaluate(a) => evaluate_cmd(&cfg, a),
        Command::Locate(a) => locate(&cfg, a),
        Command::Simulate(a) => simulate(&cfg, a),
        Command::Calibrate(a) => calibrate(&cfg, a),
        Command::Serve(a) => serve(cfg, a),
    }
}

/// Parses `args` and runs the command, mapping failures to exit codes.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
