//! Command handling. One session per server; a single async mutex
//! serializes every state mutation.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread::JoinHandle;

use serde_json::Value;
use steerbeam_core::dsp::{write_wav, MultichannelAudio, StftConfig, WavEncoding};
use steerbeam_core::evaluation::si_sdr;
use steerbeam_core::geometry::Roi;
use steerbeam_core::scene::Scene;
use steerbeam_core::separation::{EstimatorContext, EstimatorRegistry, SteeringHandle, StreamingPipeline};
use tokio::sync::Mutex;

use crate::driver::{run_driver, run_metrics, DriverOptions, LoadedScene, Recording};
use crate::hub::{ClientQueue, Hub};
use crate::protocol::{ClientMessage, SegmentSummary, ServerMessage, Status, PROTOCOL_VERSION};
use crate::ServiceError;

/// Segments shorter than this get no SI-SDR in the stop summary.
const MIN_SCORED_SEGMENT_S: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub stft: StftConfig,
    pub estimator: String,
    pub estimator_params: Value,
    /// Playback speed relative to real time; `None` runs unpaced.
    pub pace: Option<f64>,
    /// Where the separated output of each run is written on stop.
    pub output_dir: Option<PathBuf>,
    /// Resolves relative scene paths in `load_scene`.
    pub scene_dir: PathBuf,
    /// Cap on audio kept for the stop summary.
    pub max_record_s: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            estimator: "phase".into(),
            estimator_params: Value::Null,
            pace: Some(1.0),
            output_dir: None,
            scene_dir: PathBuf::from("."),
            max_record_s: 600.0,
        }
    }
}

struct Run {
    stop: Arc<AtomicBool>,
    steering: SteeringHandle,
    driver: Option<JoinHandle<Result<Recording, ServiceError>>>,
    metrics: Option<JoinHandle<()>>,
}

impl Drop for Run {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
    }
}

struct Session {
    status: Status,
    scene: Option<Arc<LoadedScene>>,
    gamma_deg: f64,
    run: Option<Run>,
    runs_completed: u32,
}

pub struct Service {
    cfg: ServiceConfig,
    registry: EstimatorRegistry,
    hub: Arc<Hub>,
    session: Mutex<Session>,
}

impl Service {
    pub fn new(cfg: ServiceConfig, registry: EstimatorRegistry) -> Result<Arc<Self>, ServiceError> {
        cfg.stft.validate()?;
        if !registry.names().any(|n| n == cfg.estimator) {
            return Err(ServiceError::Request(format!("unknown estimator '{}'", cfg.estimator)));
        }
        let svc = Arc::new(Self {
            cfg,
            registry,
            hub: Arc::new(Hub::default()),
            session: Mutex::new(Session {
                status: Status::Idle,
                scene: None,
                gamma_deg: 0.0,
                run: None,
                runs_completed: 0,
            }),
        });
        {
            let mut hub = svc.hub.lock();
            hub.broadcast(ServerMessage::State {
                v: PROTOCOL_VERSION,
                status: Status::Idle,
                gamma_deg: 0.0,
                theta1_deg: Roi::default().center_deg,
                theta2_deg: Roi::default().center_deg,
                half_width_deg: Roi::default().half_width_deg,
                scene_loaded: false,
                sources: vec![],
            });
            hub.broadcast(ServerMessage::boundaries(&Roi::default(), 0.0));
        }
        Ok(svc)
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    /// Handles one text frame, which may hold several newline-separated
    /// messages. Errors go back to the sender only.
    pub async fn handle_text(&self, client: &ClientQueue, text: &str) {
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let result = match ClientMessage::parse(line) {
                Ok(msg) => self.handle(client, msg).await,
                Err(e) => Err(ServiceError::Protocol(e)),
            };
            if let Err(e) = result {
                client.push(ServerMessage::error(e.to_string()));
            }
        }
    }

    pub async fn handle(&self, client: &ClientQueue, msg: ClientMessage) -> Result<(), ServiceError> {
        match msg {
            ClientMessage::Steer { gamma_deg } => self.steer(client, gamma_deg).await,
            ClientMessage::LoadScene { scene } => self.load_scene(scene).await,
            ClientMessage::Start => self.start().await,
            ClientMessage::Stop => self.stop().await,
        }
    }

    fn roi(sess: &Session) -> Roi {
        sess.scene.as_ref().map(|s| s.scene.roi).unwrap_or_default()
    }

    fn state(sess: &Session) -> ServerMessage {
        let roi = Self::roi(sess);
        ServerMessage::State {
            v: PROTOCOL_VERSION,
            status: sess.status,
            gamma_deg: sess.gamma_deg,
            theta1_deg: roi.center_deg,
            theta2_deg: roi.center_deg - sess.gamma_deg,
            half_width_deg: roi.half_width_deg,
            scene_loaded: sess.scene.is_some(),
            sources: sess.scene.as_ref().map(|s| s.sources.clone()).unwrap_or_default(),
        }
    }

    fn publish_state(&self, sess: &Session) {
        let mut hub = self.hub.lock();
        hub.broadcast(Self::state(sess));
        hub.broadcast(ServerMessage::boundaries(&Self::roi(sess), sess.gamma_deg));
    }

    fn transition_error(action: &str, allowed: &str, status: Status) -> ServiceError {
        let now = serde_json::to_value(status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        ServiceError::Transition(format!("{action} is only allowed when {allowed}; session is {now}"))
    }

    async fn steer(&self, client: &ClientQueue, gamma_deg: f64) -> Result<(), ServiceError> {
        let mut sess = self.session.lock().await;
        let Some(run) = sess.run.as_ref().filter(|_| sess.status == Status::Running) else {
            return Err(Self::transition_error("steer", "running", sess.status));
        };
        // The hub lock is held across the hand-off so that the
        // acknowledgement is queued before any metrics computed under the
        // new angle can be.
        let mut hub = self.hub.lock();
        match run.steering.set_steering(gamma_deg) {
            Ok(_) => {
                sess.gamma_deg = gamma_deg;
                hub.broadcast(Self::state(&sess));
                hub.broadcast(ServerMessage::boundaries(&Self::roi(&sess), gamma_deg));
                Ok(())
            }
            Err(e) => {
                client.push(ServerMessage::error(e.to_string()));
                hub.broadcast(Self::state(&sess));
                hub.broadcast(ServerMessage::boundaries(&Self::roi(&sess), sess.gamma_deg));
                Ok(())
            }
        }
    }

    async fn load_scene(&self, spec: Value) -> Result<(), ServiceError> {
        let mut sess = self.session.lock().await;
        if sess.status == Status::Running {
            return Err(Self::transition_error("load_scene", "idle or stopped", sess.status));
        }
        let scene = match spec {
            Value::String(path) => Scene::load(self.cfg.scene_dir.join(path))?,
            v @ Value::Object(_) => Scene::from_json_str(&v.to_string(), Some(&self.cfg.scene_dir))?,
            _ => return Err(ServiceError::Request("scene must be an object or a path string".into())),
        };
        let stft = self.cfg.stft;
        let loaded = tokio::task::spawn_blocking(move || LoadedScene::render(scene, &stft))
            .await
            .map_err(|e| ServiceError::Internal(e.to_string()))??;
        sess.scene = Some(Arc::new(loaded));
        sess.status = Status::Idle;
        sess.gamma_deg = 0.0;
        self.publish_state(&sess);
        Ok(())
    }

    async fn start(&self) -> Result<(), ServiceError> {
        let mut sess = self.session.lock().await;
        if sess.status == Status::Running {
            return Err(Self::transition_error("start", "idle or stopped", sess.status));
        }
        let Some(scene) = sess.scene.clone() else {
            return Err(ServiceError::Transition("start requires a loaded scene; send load_scene first".into()));
        };
        let ctx = EstimatorContext {
            roi: scene.scene.roi,
            geometry: scene.scene.geometry,
            stft: self.cfg.stft,
        };
        let estimator = self.registry.build(&self.cfg.estimator, &ctx, &self.cfg.estimator_params)?;
        let pipeline = StreamingPipeline::new(self.cfg.stft, ctx.roi, ctx.geometry, estimator)?;
        let steering = pipeline.steering_handle();
        steering.set_steering(sess.gamma_deg)?;
        let stop = Arc::new(AtomicBool::new(false));
        let (tx, rx) = mpsc::sync_channel(256);
        let opts = DriverOptions {
            pace: self.cfg.pace,
            max_record_samples: (self.cfg.max_record_s * self.cfg.stft.sample_rate as f64) as usize,
        };
        let driver = {
            let (scene, stop) = (Arc::clone(&scene), Arc::clone(&stop));
            std::thread::Builder::new()
                .name("steerbeam-driver".into())
                .spawn(move || run_driver(pipeline, scene, stop, tx, opts))
                .map_err(|e| ServiceError::Internal(e.to_string()))?
        };
        let metrics = {
            let (scene, hub, stft) = (Arc::clone(&scene), Arc::clone(&self.hub), self.cfg.stft);
            std::thread::Builder::new()
                .name("steerbeam-metrics".into())
                .spawn(move || run_metrics(scene, stft, rx, hub))
                .map_err(|e| ServiceError::Internal(e.to_string()))?
        };
        sess.run = Some(Run {
            stop,
            steering,
            driver: Some(driver),
            metrics: Some(metrics),
        });
        sess.status = Status::Running;
        self.publish_state(&sess);
        Ok(())
    }

    async fn stop(&self) -> Result<(), ServiceError> {
        let mut sess = self.session.lock().await;
        if sess.status != Status::Running {
            return Err(Self::transition_error("stop", "running", sess.status));
        }
        let mut run = sess.run.take().expect("running session has a run");
        run.stop.store(true, Ordering::Release);
        let (driver, metrics) = (run.driver.take(), run.metrics.take());
        let recording = tokio::task::spawn_blocking(move || {
            let rec = driver.map(|h| h.join());
            if let Some(h) = metrics {
                let _ = h.join();
            }
            rec
        })
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
        sess.status = Status::Stopped;
        let recording = match recording {
            Some(Ok(r)) => r,
            Some(Err(_)) => Err(ServiceError::Internal("pipeline driver panicked".into())),
            None => Err(ServiceError::Internal("pipeline driver missing".into())),
        };
        let recording = match recording {
            Ok(r) => r,
            Err(e) => {
                self.publish_state(&sess);
                return Err(e);
            }
        };
        let fs = self.cfg.stft.sample_rate;
        sess.runs_completed += 1;
        if let Some(dir) = &self.cfg.output_dir {
            let path = dir.join(format!("session-run{}.wav", sess.runs_completed));
            let audio = MultichannelAudio::mono(recording.output.clone(), fs);
            if let Err(e) = write_wav(&audio, &path, WavEncoding::Float32) {
                tracing::warn!("could not write {}: {e}", path.display());
            }
        }
        let mut hub = self.hub.lock();
        hub.broadcast(summarize(&recording, fs));
        hub.broadcast(Self::state(&sess));
        hub.broadcast(ServerMessage::boundaries(&Self::roi(&sess), sess.gamma_deg));
        Ok(())
    }
}

/// SI-SDR of the recorded output per constant-steering segment.
pub fn summarize(rec: &Recording, sample_rate: u32) -> ServerMessage {
    let fs = sample_rate as f64;
    let total = rec.output.len();
    let lat = rec.latency;
    let segments = rec
        .segments
        .iter()
        .enumerate()
        .map(|(i, &(gamma_deg, start))| {
            let end = rec.segments.get(i + 1).map_or(total, |s| s.1);
            let from = start.max(lat);
            let si_sdr_db = (end > from && (end - from) as f64 >= MIN_SCORED_SEGMENT_S * fs)
                .then(|| si_sdr(&rec.output[from..end], &rec.target[from - lat..end - lat]).ok())
                .flatten();
            SegmentSummary {
                gamma_deg,
                start_s: start as f64 / fs,
                end_s: end as f64 / fs,
                si_sdr_db,
            }
        })
        .collect();
    ServerMessage::Summary {
        v: PROTOCOL_VERSION,
        duration_s: total as f64 / fs,
        segments,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_aligns_output_by_latency() {
        let target: Vec<f32> = (0..16000).map(|i| ((i as f32) * 0.37).sin()).collect();
        let lat = 160;
        let mut output = vec![0.0; lat];
        output.extend_from_slice(&target[..16000 - lat]);
        let rec = Recording {
            output,
            target,
            latency: lat,
            segments: vec![(0.0, 0), (20.0, 8000), (30.0, 15000)],
        };
        let ServerMessage::Summary { duration_s, segments, .. } = summarize(&rec, 16000) else {
            panic!("not a summary");
        };
        assert_eq!(duration_s, 1.0);
        assert_eq!(segments.len(), 3);
        assert!(segments[0].si_sdr_db.unwrap() > 90.0);
        assert!(segments[1].si_sdr_db.unwrap() > 90.0);
        assert_eq!(segments[1].start_s, 0.5);
        assert!(segments[2].si_sdr_db.is_none());
    }
}
