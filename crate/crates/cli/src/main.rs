mod replay;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use steerbeam_core::dsp::{read_wav, write_wav, MultichannelAudio, StftConfig, WavEncoding};
use steerbeam_core::evaluation::{
    delta_pr, gamma_range, measure_rtf, power_reduction, pr_heatmap, score_separation, steering_sweep,
    HeatmapConfig, THREADS_ENV,
};
use steerbeam_core::geometry::{steered_boundaries, ArrayGeometry, Roi, SteeringState};
use steerbeam_core::scene::{mix_scene, Scene};
use steerbeam_core::separation::{separate_audio, EstimatorContext, EstimatorRegistry, StreamingPipeline};
use steerbeam_service::{Service, ServiceConfig};

use replay::ReplayEstimator;

/// Two-microphone area-based source separation with a steerable region of
/// interest. Angles are in degrees, measured from the array axis.
#[derive(Parser)]
#[command(name = "steerbeam", version)]
struct Cli {
    /// Global seed; overrides the seed stored in scene or heatmap files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene file into a two-channel mixture, stems and manifest.
    Simulate {
        scene: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Separate the ROI from a two-channel 16 kHz recording.
    Separate {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        roi: RoiArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Target stem (mono or two-channel) for SI-SDR and PR scoring.
        #[arg(long)]
        target_stem: Option<PathBuf>,
        /// Metrics file; defaults to metrics.json next to the output.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Print steered ROI boundaries as CSV.
    Boundary {
        /// ROI half-width.
        #[arg(long, default_value_t = 10.0)]
        beta: f64,
        /// ROI centre.
        #[arg(long, default_value_t = 90.0)]
        theta1: f64,
        /// One angle, or a range `start:end:step`.
        #[arg(long, default_value = "0:45:5")]
        gamma: String,
    },
    /// PR heatmap over a room grid, written as CSV plus a JSON sidecar.
    Heatmap {
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "heatmap.csv")]
        out: PathBuf,
    },
    /// Delta PR against steering angle, as CSV.
    Sweep {
        #[arg(long, default_value_t = 45.0)]
        max: f64,
        #[arg(long, default_value_t = 5.0)]
        step: f64,
        /// Leave mirrored cells out of the inside average.
        #[arg(long)]
        exclude_mirrored: bool,
        #[command(flatten)]
        grid: GridArgs,
        /// Also write the CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Real-time factor of the streaming pipeline on noise clips.
    Rtf {
        #[arg(long, default_value_t = 100)]
        clips: usize,
        #[arg(long, default_value_t = 10.0)]
        clip_len: f64,
        #[command(flatten)]
        roi: RoiArgs,
        #[command(flatten)]
        est: EstimatorArgs,
    },
    /// Run the WebSocket session server on /session.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Base directory for scene paths sent by clients.
        #[arg(long, default_value = ".")]
        scene_dir: PathBuf,
        /// Where separated audio is written when a run stops.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Playback speed relative to real time; 0 runs unpaced.
        #[arg(long, default_value_t = 1.0)]
        pace: f64,
        #[command(flatten)]
        est: EstimatorArgs,
    },
}

#[derive(Args, Clone)]
struct RoiArgs {
    /// Steering angle.
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// ROI half-width.
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    /// ROI centre.
    #[arg(long, default_value_t = 90.0)]
    theta1: f64,
    /// Microphone spacing in metres.
    #[arg(long, default_value_t = 0.05)]
    d: f64,
    /// Speed of sound in m/s.
    #[arg(long, default_value_t = 343.0)]
    c: f64,
}

impl RoiArgs {
    fn resolve(&self) -> Result<(Roi, ArrayGeometry)> {
        Ok((Roi::new(self.theta1, self.beta)?, ArrayGeometry::new(self.d, self.c)?))
    }
}

#[derive(Args, Clone)]
struct EstimatorArgs {
    /// Registered mask estimator: phase, all-pass or mute.
    #[arg(long, default_value = "phase")]
    estimator: String,
    /// Estimator parameters as a JSON object.
    #[arg(long)]
    params: Option<String>,
}

impl EstimatorArgs {
    fn params(&self) -> Result<Value> {
        match &self.params {
            None => Ok(Value::Null),
            Some(s) => serde_json::from_str(s).context("--params is not valid JSON"),
        }
    }
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Heatmap configuration file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Disable reflections (direct path only).
    #[arg(long)]
    anechoic: bool,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    theta1: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    cell_size: Option<f64>,
    #[arg(long)]
    estimator: Option<String>,
}

impl GridArgs {
    fn resolve(&self, seed: Option<u64>) -> Result<HeatmapConfig> {
        let mut cfg: HeatmapConfig = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => HeatmapConfig::default(),
        };
        if self.anechoic {
            cfg = cfg.anechoic();
        }
        if self.beta.is_some() || self.theta1.is_some() {
            cfg.roi = Roi::new(
                self.theta1.unwrap_or(cfg.roi.center_deg),
                self.beta.unwrap_or(cfg.roi.half_width_deg),
            )?;
        }
        if let Some(d) = self.d {
            cfg.geometry = ArrayGeometry::new(d, cfg.geometry.speed_of_sound)?;
        }
        if let Some(s) = self.cell_size {
            cfg.cell_size_m = s;
        }
        if let Some(e) = &self.estimator {
            cfg.estimator = e.clone();
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            fail("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    let level = ["warn", "info", "debug"][cli.verbose.min(2) as usize];
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| level.into()))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            fail(error_kind(&e), &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}

fn fail(kind: &str, message: &str) {
    let body = json!({ "error": { "kind": kind, "message": message.trim_end() } });
    let _ = writeln!(std::io::stderr(), "{body}");
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    use steerbeam_core::Error as E;
    match e.downcast_ref::<E>() {
        Some(E::StftConfig(_)) => "stft_config",
        Some(E::SampleRate { .. }) => "sample_rate",
        Some(E::TooShort { .. }) => "too_short",
        Some(E::Dimension(_)) => "dimension",
        Some(E::BinOutOfRange { .. }) => "dimension",
        Some(E::Geometry(_)) => "geometry",
        Some(E::Steering { .. }) => "steering",
        Some(E::UnsupportedEncoding(_)) | Some(E::Wav { .. }) => "wav",
        Some(E::Io { .. }) => "io",
        Some(E::Scene(_)) | Some(E::SceneFile { .. }) => "scene",
        Some(E::Simulation(_)) => "simulation",
        Some(E::Estimator { .. }) | Some(E::UnknownEstimator(_)) => "estimator",
        Some(E::Metric(_)) => "metric",
        None if e.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "invalid_input",
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Simulate { scene, out_dir } => simulate(&scene, &out_dir, seed),
        Command::Separate {
            input,
            output,
            roi,
            est,
            target_stem,
            metrics,
        } => separate(&input, &output, &roi, &est, target_stem.as_deref(), metrics),
        Command::Boundary { beta, theta1, gamma } => boundary(beta, theta1, &gamma),
        Command::Heatmap { gamma, grid, out } => heatmap(gamma, &grid.resolve(seed)?, &out),
        Command::Sweep {
            max,
            step,
            exclude_mirrored,
            grid,
            out,
        } => sweep(max, step, exclude_mirrored, &grid.resolve(seed)?, out.as_deref()),
        Command::Rtf {
            clips,
            clip_len,
            roi,
            est,
        } => rtf(clips, clip_len, &roi, &est, seed.unwrap_or(0)),
        Command::Serve {
            addr,
            scene_dir,
            output_dir,
            pace,
            est,
        } => serve(&addr, scene_dir, output_dir, pace, &est),
    }
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn simulate(scene_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut scene = Scene::load(scene_path)?;
    if let Some(s) = seed {
        scene.seed = s;
    }
    let mix = mix_scene(&scene)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut files = vec![
        ("mixture", "mixture.wav", &mix.mixture),
        ("target", "target.wav", &mix.target),
        ("interferer", "interferer.wav", &mix.interferer),
        ("noise", "noise.wav", &mix.noise),
    ]
    .into_iter()
    .map(|(k, f, a)| (k.to_string(), f.to_string(), a))
    .collect::<Vec<_>>();
    for (i, a) in mix.sources.iter().enumerate() {
        files.push((format!("source{i}"), format!("source{i}.wav"), a));
    }
    for (_, name, audio) in &files {
        write_wav(audio, out_dir.join(name), WavEncoding::Float32)?;
    }
    let manifest = json!({
        "scene": scene,
        "seed": scene.seed,
        "num_samples": mix.mixture.len(),
        "gains": mix.gains,
        "source_angles_deg": (0..scene.sources.len()).map(|i| scene.source_angle(i)).collect::<Vec<_>>(),
        "files": files.iter().map(|(k, f, _)| (k.clone(), Value::from(f.clone()))).collect::<serde_json::Map<_, _>>(),
    });
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    println!("{}", out_dir.join("manifest.json").display());
    Ok(())
}

fn two_channel(audio: MultichannelAudio) -> Result<MultichannelAudio> {
    match audio.num_channels() {
        2 => Ok(audio),
        1 => {
            let ch = audio.channel(0).to_vec();
            Ok(MultichannelAudio::new(vec![ch.clone(), ch], audio.sample_rate())?)
        }
        n => bail!(steerbeam_core::Error::Dimension(format!("stem has {n} channels"))),
    }
}

fn separate(
    input: &Path,
    output: &Path,
    roi_args: &RoiArgs,
    est: &EstimatorArgs,
    target_stem: Option<&Path>,
    metrics_path: Option<PathBuf>,
) -> Result<()> {
    let cfg = StftConfig::default();
    let mixture = read_wav(input)?;
    if mixture.num_channels() != 2 {
        bail!(steerbeam_core::Error::Dimension(format!(
            "{} has {} channel(s); separation needs 2",
            input.display(),
            mixture.num_channels()
        )));
    }
    if mixture.sample_rate() != cfg.sample_rate {
        bail!(steerbeam_core::Error::SampleRate {
            expected: cfg.sample_rate,
            actual: mixture.sample_rate()
        });
    }
    let (roi, geometry) = roi_args.resolve()?;
    let steering = SteeringState::new(roi_args.gamma, &roi, &geometry, &cfg)?;
    let ctx = EstimatorContext { roi, geometry, stft: cfg };
    let mut estimator = EstimatorRegistry::default().build(&est.estimator, &ctx, &est.params()?)?;
    let (separated, mask) = separate_audio(&mixture, estimator.as_mut(), &steering, &cfg)?;
    write_wav(&separated, output, WavEncoding::Float32)?;

    let b = steered_boundaries(&roi, roi_args.gamma);
    let mut metrics = json!({
        "input": input,
        "output": output,
        "estimator": est.estimator,
        "gamma_deg": roi_args.gamma,
        "theta1_deg": roi.center_deg,
        "theta2_deg": steering.theta2_deg(),
        "beta_deg": roi.half_width_deg,
        "mic_spacing_m": geometry.mic_spacing,
        "boundaries": b,
        "pr_mixture_db": power_reduction(mixture.channel(0), separated.channel(0))?,
    });
    if let Some(stem_path) = target_stem {
        let stem = two_channel(read_wav(stem_path)?)?;
        if stem.len() != mixture.len() || stem.sample_rate() != mixture.sample_rate() {
            bail!(steerbeam_core::Error::Dimension(format!(
                "target stem has {} samples at {} Hz, mixture {} at {} Hz",
                stem.len(),
                stem.sample_rate(),
                mixture.len(),
                mixture.sample_rate()
            )));
        }
        let scores = score_separation(mixture.channel(0), separated.channel(0), stem.channel(0))?;
        let (kept, _) = separate_audio(&stem, &mut ReplayEstimator::new(mask), &steering, &cfg)?;
        metrics["si_sdr_db"] = json!(scores.si_sdr_db);
        metrics["si_sdr_improvement_db"] = json!(scores.si_sdr_improvement_db);
        metrics["pr_target_db"] = json!(power_reduction(stem.channel(0), kept.channel(0))?);
    }
    let metrics_path = metrics_path.unwrap_or_else(|| {
        output.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).join("metrics.json")
    });
    write_json(&metrics_path, &metrics)?;
    println!("{}", serde_json::to_string(&metrics)?);
    Ok(())
}

fn parse_gammas(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad --gamma '{spec}'")))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [g] => Ok(vec![*g]),
        [start, end, step] if *step > 0.0 && end >= start => {
            let n = ((end - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + i as f64 * step).collect())
        }
        _ => bail!("--gamma must be a number or start:end:step with step > 0 and end >= start"),
    }
}

fn boundary(beta: f64, theta1: f64, gamma: &str) -> Result<()> {
    let roi = Roi::new(theta1, beta)?;
    let mut out = String::from("gamma_deg,phi_l_deg,phi_r_deg,saturated\n");
    for g in parse_gammas(gamma)? {
        let b = steered_boundaries(&roi, g);
        let sat = match (b.saturated_left, b.saturated_right) {
            (false, false) => "none",
            (true, false) => "left",
            (false, true) => "right",
            (true, true) => "both",
        };
        out.push_str(&format!("{g},{:.2},{:.2},{sat}\n", b.phi_left_deg, b.phi_right_deg));
    }
    print!("{out}");
    Ok(())
}

fn heatmap(gamma: f64, cfg: &HeatmapConfig, out: &Path) -> Result<()> {
    let grid = pr_heatmap(cfg, gamma, &EstimatorRegistry::default())?;
    grid.write(cfg, out)?;
    let mean = |inside: bool| {
        let v: Vec<f64> = grid.valid_cells().filter(|c| c.inside_roi == inside).filter_map(|c| c.pr_db).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let summary = json!({
        "csv": out,
        "gamma_deg": gamma,
        "cells": grid.cells.len(),
        "valid_cells": grid.valid_cells().count(),
        "inside_mean_pr_db": mean(true),
        "outside_mean_pr_db": mean(false),
        "delta_pr_db": delta_pr(&grid, &grid.boundaries, false).ok(),
        "threads_env": THREADS_ENV,
    });
    println!("{summary}");
    Ok(())
}

fn sweep(max: f64, step: f64, exclude_mirrored: bool, cfg: &HeatmapConfig, out: Option<&Path>) -> Result<()> {
    if !(step > 0.0) || max < 0.0 {
        bail!("--step must be positive and --max non-negative");
    }
    let points = steering_sweep(cfg, &gamma_range(max, step), &EstimatorRegistry::default(), exclude_mirrored)?;
    let mut csv = String::from("gamma_deg,delta_pr_db,phi_l_deg,phi_r_deg\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{:.4},{:.2},{:.2}\n",
            p.gamma_deg, p.delta_pr_db, p.boundaries.phi_left_deg, p.boundaries.phi_right_deg
        ));
    }
    if let Some(path) = out {
        fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{csv}");
    Ok(())
}

fn rtf(clips: usize, clip_len: f64, roi_args: &RoiArgs, est: &EstimatorArgs, seed: u64) -> Result<()> {
    if clips == 0 || !(clip_len > 0.0) {
        bail!("--clips and --clip-len must be positive");
    }
    let cfg = StftConfig::default();
    let (roi, geometry) = roi_args.resolve()?;
    let ctx = EstimatorContext { roi, geometry, stft: cfg };
    let estimator = EstimatorRegistry::default().build(&est.estimator, &ctx, &est.params()?)?;
    let mut pipeline = StreamingPipeline::new(cfg, roi, geometry, estimator)?;
    pipeline.set_steering(roi_args.gamma)?;
    let report = measure_rtf(&mut pipeline, clips, clip_len, cfg.sample_rate, seed)?;
    println!("{}", serde_json::to_string(&json!({
        "mean": report.mean,
        "std": report.std,
        "clips": report.clips,
        "clip_len_s": report.clip_len_s,
        "gamma_deg": roi_args.gamma,
        "estimator": est.estimator,
    }))?);
    Ok(())
}

fn serve(addr: &str, scene_dir: PathBuf, output_dir: Option<PathBuf>, pace: f64, est: &EstimatorArgs) -> Result<()> {
    if let Some(dir) = &output_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let cfg = ServiceConfig {
        estimator: est.estimator.clone(),
        estimator_params: est.params()?,
        pace: (pace > 0.0).then_some(pace),
        output_dir,
        scene_dir,
        ..Default::default()
    };
    let service = Service::new(cfg, EstimatorRegistry::default())?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on ws://{}/session", listener.local_addr()?);
        steerbeam_service::serve(listener, service).await?;
        Ok(())
    })
}
