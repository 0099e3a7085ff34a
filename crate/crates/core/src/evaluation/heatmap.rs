use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::metrics::power_reduction;
use crate::dsp::{MultichannelAudio, StftConfig};
use crate::error::{Error, Result};
use crate::geometry::{linear_boundaries, steered_boundaries, ArrayGeometry, Roi, SteeredBoundaries, SteeringState};
use crate::scene::{simulate_shoebox, ArrayPose, Placement, Role, Room, Scene, ShoeboxRoom, SignalSource, SourceSpec};
use crate::separation::{separate_audio, EstimatorContext, EstimatorRegistry};

/// Environment variable that caps the worker threads used for heatmaps.
pub const THREADS_ENV: &str = "STEERBEAM_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    /// `max_order: Some(0)` keeps only the direct path (anechoic).
    pub room: ShoeboxRoom,
    pub array: ArrayPose,
    pub geometry: ArrayGeometry,
    pub roi: Roi,
    pub stft: StftConfig,
    pub cell_size_m: f64,
    /// Cells closer than this to the array centre are marked invalid.
    pub min_distance_m: f64,
    pub probe: SignalSource,
    pub probe_duration_s: f64,
    pub seed: u64,
    pub estimator: String,
    pub estimator_params: Value,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            room: ShoeboxRoom::new([6.0, 6.0, 3.0], 0.5),
            array: ArrayPose {
                position: [3.0, 3.0],
                orientation_deg: 0.0,
                height_m: None,
            },
            geometry: ArrayGeometry::default(),
            roi: Roi::default(),
            stft: StftConfig::default(),
            cell_size_m: 0.5,
            min_distance_m: 0.3,
            probe: SignalSource::SpeechShapedNoise,
            probe_duration_s: 2.0,
            seed: 0,
            estimator: "phase".into(),
            estimator_params: Value::Null,
        }
    }
}

impl HeatmapConfig {
    /// Same room with reflections disabled.
    pub fn anechoic(mut self) -> Self {
        self.room.max_order = Some(0);
        self
    }

    /// Cell centres at whole multiples of the cell size strictly inside the
    /// room.
    pub fn cell_centres(&self) -> Vec<[f64; 2]> {
        let axis = |len: f64| -> Vec<f64> {
            let n = (len / self.cell_size_m).ceil() as i64;
            (1..n)
                .map(|i| i as f64 * self.cell_size_m)
                .filter(|&v| v > 0.0 && v < len)
                .collect()
        };
        let (xs, ys) = (axis(self.room.dims[0]), axis(self.room.dims[1]));
        ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub x_m: f64,
    pub y_m: f64,
    /// Angle from the array axis, in [0, 360).
    pub angle_deg: f64,
    pub pr_db: Option<f64>,
    /// Inside the steered ROI, counting the mirrored half.
    pub inside_roi: bool,
    pub mirrored: bool,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One family of boundary rays drawn from the array to the room walls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOverlay {
    pub label: String,
    pub left_deg: f64,
    pub right_deg: f64,
    /// Front rays first, then their mirror images.
    pub polylines: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub room_dims: [f64; 3],
    pub cell_size_m: f64,
    pub array: ArrayPose,
    pub gamma_deg: f64,
    pub boundaries: SteeredBoundaries,
    pub cells: Vec<HeatmapCell>,
    pub overlays: Vec<BoundaryOverlay>,
}

impl HeatmapGrid {
    pub fn valid_cells(&self) -> impl Iterator<Item = &HeatmapCell> {
        self.cells.iter().filter(|c| c.valid)
    }

    /// Valid cell whose direction is closest to `angle_deg` (front half),
    /// ties broken by distance to the array.
    pub fn cell_towards(&self, angle_deg: f64) -> Option<&HeatmapCell> {
        let [ax, ay] = self.array.position;
        self.valid_cells()
            .filter(|c| c.angle_deg <= 180.0)
            .min_by(|a, b| {
                let key = |c: &HeatmapCell| {
                    (
                        ((c.angle_deg - angle_deg).abs() * 1e6).round(),
                        (c.x_m - ax).hypot(c.y_m - ay),
                    )
                };
                key(a).partial_cmp(&key(b)).unwrap()
            })
    }

    /// Valid cell at the given centre.
    pub fn cell_at(&self, x_m: f64, y_m: f64) -> Option<&HeatmapCell> {
        self.valid_cells()
            .find(|c| (c.x_m - x_m).abs() < 1e-9 && (c.y_m - y_m).abs() < 1e-9)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_m,y_m,angle_deg,pr_db,inside_roi,valid\n");
        for c in &self.cells {
            let pr = c.pr_db.map(|v| format!("{v:.4}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{:.3},{:.3},{:.3},{pr},{},{}",
                c.x_m, c.y_m, c.angle_deg, c.inside_roi as u8, c.valid as u8
            );
        }
        s
    }

    /// Overlays and run metadata without the per-cell values.
    pub fn sidecar(&self, cfg: &HeatmapConfig) -> Value {
        serde_json::json!({
            "gamma_deg": self.gamma_deg,
            "room_dims": self.room_dims,
            "cell_size_m": self.cell_size_m,
            "array": self.array,
            "boundaries": self.boundaries,
            "overlays": self.overlays,
            "valid_cells": self.valid_cells().count(),
            "config": cfg,
        })
    }

    /// Writes `<stem>.csv` and `<stem>.json` next to each other.
    pub fn write(&self, cfg: &HeatmapConfig, csv_path: &Path) -> Result<()> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Error::Io { path, source }
        };
        std::fs::write(csv_path, self.to_csv()).map_err(io(csv_path))?;
        let json_path = csv_path.with_extension("json");
        let text = serde_json::to_string_pretty(&self.sidecar(cfg)).expect("serializable");
        std::fs::write(&json_path, text).map_err(io(&json_path))
    }
}

fn ray_to_walls(origin: [f64; 2], dir_deg: f64, dims: [f64; 3]) -> [f64; 2] {
    let (dx, dy) = (dir_deg.to_radians().cos(), dir_deg.to_radians().sin());
    let mut t = f64::INFINITY;
    for (d, o, len) in [(dx, origin[0], dims[0]), (dy, origin[1], dims[1])] {
        if d > 1e-12 {
            t = t.min((len - o) / d);
        } else if d < -1e-12 {
            t = t.min(-o / d);
        }
    }
    [origin[0] + t * dx, origin[1] + t * dy]
}

fn overlay(label: &str, left: f64, right: f64, array: &ArrayPose, dims: [f64; 3]) -> BoundaryOverlay {
    let polylines = [left, right, 360.0 - left, 360.0 - right]
        .iter()
        .map(|a| vec![array.position, ray_to_walls(array.position, array.orientation_deg + a, dims)])
        .collect();
    BoundaryOverlay {
        label: label.into(),
        left_deg: left,
        right_deg: right,
        polylines,
    }
}

/// Runs `f` on a pool sized by [`THREADS_ENV`] when set, otherwise on the
/// global pool.
pub fn with_thread_limit<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Simulation(format!("thread pool: {e}"))),
        _ => Ok(f()),
    }
}

fn run_cell(
    cfg: &HeatmapConfig,
    registry: &EstimatorRegistry,
    steering: &SteeringState,
    probe: &[f32],
    pos: [f64; 2],
) -> Result<f64> {
    let mut scene = Scene::anechoic(vec![SourceSpec::new(
        Role::Target,
        cfg.probe.clone(),
        Placement::Absolute { position: pos },
    )]);
    scene.sample_rate = cfg.stft.sample_rate;
    scene.duration_s = cfg.probe_duration_s;
    scene.seed = cfg.seed;
    scene.room = Room::Shoebox(cfg.room);
    scene.array = cfg.array;
    scene.geometry = cfg.geometry;
    scene.roi = cfg.roi;
    scene.exclude_mirrored_roi = false;
    let mic_signals: MultichannelAudio = simulate_shoebox(&scene, &[probe.to_vec()], None)?.remove(0);
    let ctx = EstimatorContext {
        roi: cfg.roi,
        geometry: cfg.geometry,
        stft: cfg.stft,
    };
    let mut est = registry.build(&cfg.estimator, &ctx, &cfg.estimator_params)?;
    let (out, _) = separate_audio(&mic_signals, est.as_mut(), steering, &cfg.stft)?;
    power_reduction(mic_signals.channel(0), out.channel(0))
}

/// Power reduction for a probe source placed at every grid cell, with the
/// pipeline steered by `gamma_deg`. Per-cell failures mark the cell
/// invalid; configuration errors abort.
pub fn pr_heatmap(cfg: &HeatmapConfig, gamma_deg: f64, registry: &EstimatorRegistry) -> Result<HeatmapGrid> {
    cfg.room.validate(cfg.stft.sample_rate)?;
    if !(cfg.cell_size_m > 0.0) {
        return Err(Error::Metric(format!("cell size must be positive, got {}", cfg.cell_size_m)));
    }
    let ctx = EstimatorContext {
        roi: cfg.roi,
        geometry: cfg.geometry,
        stft: cfg.stft,
    };
    registry.build(&cfg.estimator, &ctx, &cfg.estimator_params)?;
    let steering = SteeringState::new(gamma_deg, &cfg.roi, &cfg.geometry, &cfg.stft)?;
    let boundaries = steered_boundaries(&cfg.roi, gamma_deg);
    let n = (cfg.probe_duration_s * cfg.stft.sample_rate as f64).round() as usize;
    let probe = cfg.probe.render(n, cfg.stft.sample_rate, cfg.seed)?;

    let centres = cfg.cell_centres();
    let cells = with_thread_limit(|| {
        centres
            .par_iter()
            .map(|&[x, y]| {
                let angle = cfg.array.angle_of(&Placement::Absolute { position: [x, y] });
                let inside = boundaries.contains(angle);
                let mut cell = HeatmapCell {
                    x_m: x,
                    y_m: y,
                    angle_deg: angle,
                    pr_db: None,
                    inside_roi: inside,
                    mirrored: inside && angle > 180.0,
                    valid: false,
                    error: None,
                };
                let dist = (x - cfg.array.position[0]).hypot(y - cfg.array.position[1]);
                if dist < cfg.min_distance_m {
                    cell.error = Some(format!("within {} m of the array", cfg.min_distance_m));
                    return cell;
                }
                match run_cell(cfg, registry, &steering, &probe, [x, y]) {
                    Ok(pr) => {
                        cell.pr_db = Some(pr);
                        cell.valid = true;
                    }
                    Err(e) => cell.error = Some(e.to_string()),
                }
                cell
            })
            .collect::<Vec<_>>()
    })?;

    let (il, ir) = cfg.roi.boundaries_deg();
    let (ll, lr) = linear_boundaries(&cfg.roi, gamma_deg);
    let overlays = vec![
        overlay("initial", il, ir, &cfg.array, cfg.room.dims),
        overlay("linear-shift", ll, lr, &cfg.array, cfg.room.dims),
        overlay("steered", boundaries.phi_left_deg, boundaries.phi_right_deg, &cfg.array, cfg.room.dims),
    ];
    Ok(HeatmapGrid {
        room_dims: cfg.room.dims,
        cell_size_m: cfg.cell_size_m,
        array: cfg.array,
        gamma_deg,
        boundaries,
        cells,
        overlays,
    })
}

/// Mean PR over valid cells outside the boundaries minus mean PR inside.
/// Mirrored cells count as inside unless `exclude_mirrored` is set, in
/// which case they are left out of both means.
pub fn delta_pr(grid: &HeatmapGrid, boundaries: &SteeredBoundaries, exclude_mirrored: bool) -> Result<f64> {
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for c in grid.valid_cells() {
        let Some(pr) = c.pr_db else { continue };
        if boundaries.contains(c.angle_deg) {
            if !(exclude_mirrored && c.angle_deg > 180.0) {
                inside.push(pr);
            }
        } else {
            outside.push(pr);
        }
    }
    if inside.is_empty() || outside.is_empty() {
        return Err(Error::Metric(format!(
            "degenerate split: {} cells inside, {} outside",
            inside.len(),
            outside.len()
        )));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(mean(&outside) - mean(&inside))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gamma_deg: f64,
    pub delta_pr_db: f64,
    pub boundaries: SteeredBoundaries,
}

/// Heatmap and delta PR for each steering angle.
pub fn steering_sweep(
    cfg: &HeatmapConfig,
    gammas: &[f64],
    registry: &EstimatorRegistry,
    exclude_mirrored: bool,
) -> Result<Vec<SweepPoint>> {
    gammas
        .iter()
        .map(|&g| {
            let grid = pr_heatmap(cfg, g, registry)?;
            Ok(SweepPoint {
                gamma_deg: g,
                delta_pr_db: delta_pr(&grid, &grid.boundaries, exclude_mirrored)?,
                boundaries: grid.boundaries,
            })
        })
        .collect()
}

/// `0, step, 2 step, ... <= max`.
pub fn gamma_range(max_deg: f64, step_deg: f64) -> Vec<f64> {
    let n = (max_deg / step_deg + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step_deg).collect()
}
