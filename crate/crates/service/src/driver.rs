//! Real-time playback of a pre-rendered scene through the streaming
//! pipeline, plus the off-path metrics worker.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{Receiver, SyncSender, TrySendError};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex32;
use steerbeam_core::dsp::{StftConfig, StftProcessor};
use steerbeam_core::evaluation::PR_CAP_DB;
use steerbeam_core::geometry::steered_boundaries;
use steerbeam_core::scene::{mix_scene, MixOutput, Scene};
use steerbeam_core::separation::StreamingPipeline;

use crate::hub::Hub;
use crate::protocol::{ServerMessage, SourceInfo, SourceMetric, PROTOCOL_VERSION};
use crate::ServiceError;

/// Length of the PR averaging window.
pub const METRICS_WINDOW_S: f64 = 0.5;
/// Frames between metrics messages (10 Hz at a 10 ms hop).
pub const METRICS_EVERY_FRAMES: u64 = 10;

/// A scene rendered once at load time, looped during playback.
pub struct LoadedScene {
    pub scene: Scene,
    pub mix: MixOutput,
    pub sources: Vec<SourceInfo>,
    /// Whole hops per loop; a trailing partial hop is not played.
    pub frames: usize,
    /// Reference-channel spectra of each scaled stem, framed exactly as the
    /// streaming pipeline frames the looped mixture.
    pub stem_spectra: Vec<Vec<Complex32>>,
}

impl LoadedScene {
    pub fn render(scene: Scene, cfg: &StftConfig) -> Result<Self, ServiceError> {
        if scene.sample_rate != cfg.sample_rate {
            return Err(ServiceError::Request(format!(
                "scene sample_rate {} differs from the pipeline's {}",
                scene.sample_rate, cfg.sample_rate
            )));
        }
        let mix = mix_scene(&scene)?;
        let frames = mix.mixture.len() / cfg.hop;
        if frames == 0 {
            return Err(ServiceError::Request("scene is shorter than one hop".into()));
        }
        let loop_len = frames * cfg.hop;
        let mut stft = StftProcessor::<f32>::new(*cfg)?;
        let mut window = vec![0.0f32; cfg.window_len];
        let bins = cfg.bins();
        let stem_spectra = mix
            .sources
            .iter()
            .map(|stem| {
                let x = stem.channel(0);
                let mut spec = vec![Complex32::new(0.0, 0.0); frames * bins];
                for p in 0..frames {
                    let end = (p + 1) * cfg.hop + loop_len;
                    for (j, w) in window.iter_mut().enumerate() {
                        *w = x[(end - cfg.window_len + j) % loop_len];
                    }
                    stft.analyze(&window, &mut spec[p * bins..(p + 1) * bins]);
                }
                spec
            })
            .collect();
        let sources = scene
            .sources
            .iter()
            .enumerate()
            .map(|(i, s)| SourceInfo {
                name: s.name.clone().unwrap_or_else(|| format!("source{i}")),
                angle_deg: scene.source_angle(i),
                role: s.role,
            })
            .collect();
        Ok(Self {
            scene,
            mix,
            sources,
            frames,
            stem_spectra,
        })
    }
}

/// One processed frame, as seen by the metrics worker.
pub struct FrameReport {
    pub frame_idx: u64,
    pub gamma_deg: f64,
    pub mask: Vec<Complex32>,
}

/// Audio captured during a run, for the stop summary.
pub struct Recording {
    /// Pipeline output, delayed by `latency` samples.
    pub output: Vec<f32>,
    /// Target stem at the reference microphone, as fed.
    pub target: Vec<f32>,
    pub latency: usize,
    /// (steering angle, first output-aligned sample) per segment.
    pub segments: Vec<(f64, usize)>,
}

pub struct DriverOptions {
    /// Playback speed relative to real time; `None` runs unpaced.
    pub pace: Option<f64>,
    pub max_record_samples: usize,
}

/// Feeds the looped scene hop by hop until `stop` is raised.
pub fn run_driver(
    mut pipeline: StreamingPipeline,
    scene: Arc<LoadedScene>,
    stop: Arc<AtomicBool>,
    reports: SyncSender<FrameReport>,
    opts: DriverOptions,
) -> Result<Recording, ServiceError> {
    let hop = pipeline.hop();
    let fs = pipeline.config().sample_rate as f64;
    let frame_period_s = hop as f64 / fs / opts.pace.unwrap_or(1.0).max(1e-6);
    let mix = &scene.mix;
    let target = mix.target.channel(0);
    let mut rec = Recording {
        output: Vec::new(),
        target: Vec::new(),
        latency: pipeline.latency(),
        segments: Vec::new(),
    };
    let mut out = vec![0.0f32; hop];
    let start = Instant::now();
    let mut n: u64 = 0;
    while !stop.load(Ordering::Acquire) {
        let p = (n % scene.frames as u64) as usize;
        let span = p * hop..(p + 1) * hop;
        pipeline.process_frame(&mix.mixture.channel(0)[span.clone()], &mix.mixture.channel(1)[span.clone()], &mut out)?;
        let gamma = pipeline.applied_gamma_deg();
        if rec.output.len() + hop <= opts.max_record_samples {
            if rec.segments.last().map_or(true, |&(g, _)| g != gamma) {
                rec.segments.push((gamma, rec.output.len()));
            }
            rec.output.extend_from_slice(&out);
            rec.target.extend_from_slice(&target[span]);
        }
        let report = FrameReport {
            frame_idx: n,
            gamma_deg: gamma,
            mask: pipeline.last_mask().to_vec(),
        };
        match reports.try_send(report) {
            Ok(()) | Err(TrySendError::Full(_)) => {}
            Err(TrySendError::Disconnected(_)) => break,
        }
        n += 1;
        if opts.pace.is_some() {
            let due = start + Duration::from_secs_f64(frame_period_s * n as f64);
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
    }
    Ok(rec)
}

/// Consumes frame reports and broadcasts windowed per-source PR.
pub fn run_metrics(scene: Arc<LoadedScene>, cfg: StftConfig, reports: Receiver<FrameReport>, hub: Arc<Hub>) {
    let bins = cfg.bins();
    let window = (METRICS_WINDOW_S * cfg.sample_rate as f64 / cfg.hop as f64).round().max(1.0) as usize;
    let n_src = scene.stem_spectra.len();
    // Ring of (input, output) energy per frame per source.
    let mut ring = vec![vec![(0.0f64, 0.0f64); window]; n_src];
    let roi = scene.scene.roi;
    while let Ok(r) = reports.recv() {
        let p = (r.frame_idx % scene.frames as u64) as usize;
        let slot = (r.frame_idx as usize) % window;
        for (s, spec) in scene.stem_spectra.iter().enumerate() {
            let frame = &spec[p * bins..(p + 1) * bins];
            let (mut e_in, mut e_out) = (0.0, 0.0);
            for (y, q) in frame.iter().zip(&r.mask) {
                e_in += y.norm_sqr() as f64;
                e_out += (y * q).norm_sqr() as f64;
            }
            ring[s][slot] = (e_in, e_out);
        }
        if (r.frame_idx + 1) % METRICS_EVERY_FRAMES != 0 {
            continue;
        }
        let bounds = steered_boundaries(&roi, r.gamma_deg);
        let mut per_source = Vec::with_capacity(n_src);
        let (mut inside, mut outside) = (Vec::new(), Vec::new());
        for (s, info) in scene.sources.iter().enumerate() {
            let (e_in, e_out) = ring[s].iter().fold((0.0, 0.0), |a, e| (a.0 + e.0, a.1 + e.1));
            let pr_db = (e_in > 0.0).then(|| {
                if e_out > 0.0 {
                    (10.0 * (e_in / e_out).log10()).min(PR_CAP_DB)
                } else {
                    PR_CAP_DB
                }
            });
            if let Some(pr) = pr_db {
                if bounds.contains(info.angle_deg) {
                    if !(scene.scene.exclude_mirrored_roi && info.angle_deg > 180.0) {
                        inside.push(pr);
                    }
                } else {
                    outside.push(pr);
                }
            }
            per_source.push(SourceMetric {
                angle_deg: info.angle_deg,
                role: info.role,
                pr_db,
            });
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let delta_pr_db = (!inside.is_empty() && !outside.is_empty()).then(|| mean(&outside) - mean(&inside));
        hub.broadcast(ServerMessage::Metrics {
            v: PROTOCOL_VERSION,
            t_s: (r.frame_idx + 1) as f64 * cfg.hop as f64 / cfg.sample_rate as f64,
            gamma_deg: r.gamma_deg,
            per_source,
            delta_pr_db,
        });
    }
}
