use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ShoeboxRoom, SignalSource};
use crate::error::{Error, Result};
use crate::geometry::{fold_to_front, ArrayGeometry, Roi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Target,
    Interferer,
    Noise,
}

/// Where a source sits: polar coordinates relative to the array (angle from
/// the array axis) or absolute room coordinates on the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Placement {
    Polar { angle_deg: f64, distance_m: f64 },
    Absolute { position: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub role: Role,
    pub signal: SignalSource,
    #[serde(flatten)]
    pub placement: Placement,
}

impl SourceSpec {
    pub fn new(role: Role, signal: SignalSource, placement: Placement) -> Self {
        Self {
            name: None,
            role,
            signal,
            placement,
        }
    }

    pub fn polar(role: Role, signal: SignalSource, angle_deg: f64, distance_m: f64) -> Self {
        Self::new(role, signal, Placement::Polar { angle_deg, distance_m })
    }

    pub fn label(&self, idx: usize) -> String {
        match &self.name {
            Some(n) => format!("source {idx} ('{n}')"),
            None => format!("source {idx} ({:?})", self.role).to_lowercase(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayPose {
    /// Array centre on the horizontal plane, metres.
    pub position: [f64; 2],
    /// Direction of the array axis (left mic towards second mic), degrees.
    #[serde(default)]
    pub orientation_deg: f64,
    /// Height of the array and all sources; defaults to half the room height.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_m: Option<f64>,
}

impl Default for ArrayPose {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0],
            orientation_deg: 0.0,
            height_m: None,
        }
    }
}

impl ArrayPose {
    /// Absolute position of a placement on the horizontal plane.
    pub fn resolve(&self, placement: &Placement) -> [f64; 2] {
        match *placement {
            Placement::Absolute { position } => position,
            Placement::Polar { angle_deg, distance_m } => {
                let a = (self.orientation_deg + angle_deg).to_radians();
                [
                    self.position[0] + distance_m * a.cos(),
                    self.position[1] + distance_m * a.sin(),
                ]
            }
        }
    }

    /// Angle of a placement relative to the array axis, in [0, 360).
    pub fn angle_of(&self, placement: &Placement) -> f64 {
        match *placement {
            Placement::Polar { angle_deg, .. } => angle_deg.rem_euclid(360.0),
            Placement::Absolute { position } => {
                let dx = position[0] - self.position[0];
                let dy = position[1] - self.position[1];
                (dy.atan2(dx).to_degrees() - self.orientation_deg).rem_euclid(360.0)
            }
        }
    }

    /// Positions of the reference (left) and second microphone.
    pub fn mic_positions(&self, geom: &ArrayGeometry) -> [[f64; 2]; 2] {
        let a = self.orientation_deg.to_radians();
        let (ux, uy) = (a.cos(), a.sin());
        let h = geom.mic_spacing / 2.0;
        [
            [self.position[0] - h * ux, self.position[1] - h * uy],
            [self.position[0] + h * ux, self.position[1] + h * uy],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Room {
    /// Free field: sources are rendered as far-field plane waves.
    Anechoic,
    Shoebox(ShoeboxRoom),
}

fn default_sample_rate() -> u32 {
    16_000
}
fn default_duration() -> f64 {
    4.0
}
fn default_sir() -> f64 {
    5.0
}
fn default_snr() -> f64 {
    7.0
}
fn default_level() -> f64 {
    -28.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    pub room: Room,
    #[serde(default)]
    pub array: ArrayPose,
    #[serde(default)]
    pub geometry: ArrayGeometry,
    #[serde(default)]
    pub roi: Roi,
    #[serde(default = "default_true")]
    pub exclude_mirrored_roi: bool,
    pub sources: Vec<SourceSpec>,
    #[serde(default = "default_sir")]
    pub sir_db: f64,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default = "default_level")]
    pub level_dbfs: f64,
}

impl Scene {
    /// Free-field scene with default mixing parameters.
    pub fn anechoic(sources: Vec<SourceSpec>) -> Self {
        Self {
            sample_rate: default_sample_rate(),
            duration_s: default_duration(),
            seed: 0,
            room: Room::Anechoic,
            array: ArrayPose::default(),
            geometry: ArrayGeometry::default(),
            roi: Roi::default(),
            exclude_mirrored_roi: true,
            sources,
            sir_db: default_sir(),
            snr_db: default_snr(),
            level_dbfs: default_level(),
        }
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    pub fn source_angle(&self, idx: usize) -> f64 {
        self.array.angle_of(&self.sources[idx].placement)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.roi.validate()?;
        if self.sample_rate == 0 || !(self.duration_s > 0.0) {
            return Err(Error::Scene("sample_rate and duration_s must be positive".into()));
        }
        if !self.sources.iter().any(|s| s.role == Role::Target) {
            return Err(Error::Scene("scene needs at least one target source".into()));
        }
        for (i, src) in self.sources.iter().enumerate() {
            if let Placement::Polar { distance_m, .. } = src.placement {
                if !(distance_m > 0.0) {
                    return Err(Error::Scene(format!(
                        "{}: distance_m must be positive",
                        src.label(i)
                    )));
                }
            }
            if self.exclude_mirrored_roi && self.in_mirrored_roi(self.source_angle(i)) {
                return Err(Error::Scene(format!(
                    "{} at {:.2} deg lies in the mirrored ROI",
                    src.label(i),
                    self.source_angle(i)
                )));
            }
        }
        if let Room::Shoebox(room) = &self.room {
            room.validate(self.sample_rate)?;
            let z = self.array.height_m.unwrap_or(room.dims[2] / 2.0);
            for (m, p) in self.array.mic_positions(&self.geometry).iter().enumerate() {
                if !room.contains([p[0], p[1], z]) {
                    return Err(Error::Scene(format!("microphone {m} lies outside the room")));
                }
            }
            for (i, src) in self.sources.iter().enumerate() {
                let p = self.array.resolve(&src.placement);
                if !room.contains([p[0], p[1], z]) {
                    return Err(Error::Scene(format!("{} lies outside the room", src.label(i))));
                }
            }
        }
        Ok(())
    }

    /// Whether an angle lies in the reflection of the ROI behind the array.
    pub fn in_mirrored_roi(&self, angle_deg: f64) -> bool {
        let a = angle_deg.rem_euclid(360.0);
        let (left, right) = self.roi.boundaries_deg();
        a > 180.0 && fold_to_front(a) >= right && fold_to_front(a) <= left
    }

    /// Parses a scene from JSON text; `base` resolves relative WAV paths.
    pub fn from_json_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut scene: Scene = serde_json::from_str(text).map_err(|e| Error::SceneFile {
            path: base.map(Path::to_path_buf).unwrap_or_default(),
            msg: e.to_string(),
        })?;
        if let Some(base) = base {
            scene.resolve_paths(base);
        }
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut scene: Scene = serde_json::from_str(&text).map_err(|e| Error::SceneFile {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        scene.resolve_paths(&base);
        Ok(scene)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for src in &mut self.sources {
            if let SignalSource::Wav { path } = &mut src.signal {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }
}
