use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ArrayPose, Placement, Role, Room, Scene, ShoeboxRoom, SignalSource, SourceSpec};
use crate::error::{Error, Result};
use crate::geometry::{fold_to_front, ArrayGeometry, Roi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoisePlacement {
    #[default]
    UniformRoom,
    InsideRoi,
    OutsideRoi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerOptions {
    pub duration_s: f64,
    pub sample_rate: u32,
    pub geometry: ArrayGeometry,
    pub room_min: [f64; 3],
    pub room_max: [f64; 3],
    pub t60_range: (f64, f64),
    pub wall_clearance_m: f64,
    pub sir_range_db: (f64, f64),
    /// Mean and standard deviation of the SNR in dB.
    pub snr_db: (f64, f64),
    /// Mean and standard deviation of the mixture level in dBFS.
    pub level_dbfs: (f64, f64),
    pub with_noise: bool,
    pub noise_placement: NoisePlacement,
    pub exclude_mirrored_roi: bool,
    pub min_source_distance_m: f64,
    pub max_attempts: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            sample_rate: 16_000,
            geometry: ArrayGeometry::default(),
            room_min: [4.0, 4.0, 2.0],
            room_max: [8.0, 8.0, 4.0],
            t60_range: (0.25, 0.7),
            wall_clearance_m: 2.0,
            sir_range_db: (0.0, 10.0),
            snr_db: (7.0, 3.0),
            level_dbfs: (-28.0, 10.0),
            with_noise: true,
            noise_placement: NoisePlacement::UniformRoom,
            exclude_mirrored_roi: true,
            min_source_distance_m: 0.5,
            max_attempts: 1000,
        }
    }
}

/// Draws a training-style scene: random shoebox room and array pose, one
/// target inside the ROI, one interferer outside it and optionally a noise
/// source. Placements are rejection-sampled.
pub fn sample_training_scene(seed: u64, roi: &Roi, opts: &SamplerOptions) -> Result<Scene> {
    roi.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [0, 1, 2].map(|i| rng.gen_range(opts.room_min[i]..=opts.room_max[i]));
    let t60 = rng.gen_range(opts.t60_range.0..=opts.t60_range.1);
    let clear = opts.wall_clearance_m;
    if dims[0] < 2.0 * clear || dims[1] < 2.0 * clear {
        return Err(Error::Scene(format!(
            "room {dims:?} cannot keep the array {clear} m from every wall"
        )));
    }
    let array = ArrayPose {
        position: [
            rng.gen_range(clear..=dims[0] - clear),
            rng.gen_range(clear..=dims[1] - clear),
        ],
        orientation_deg: rng.gen_range(0.0..360.0),
        height_m: None,
    };
    let room = ShoeboxRoom::new(dims, t60);

    let (left, right) = roi.boundaries_deg();
    let in_roi = |a: f64| (right..=left).contains(&a);
    let in_mirror = |a: f64| a > 180.0 && in_roi(fold_to_front(a));
    let place = |rng: &mut ChaCha8Rng, accept: &dyn Fn(f64) -> bool, angle_range: (f64, f64)| {
        for _ in 0..opts.max_attempts {
            let angle = rng.gen_range(angle_range.0..angle_range.1);
            if !accept(angle) || (opts.exclude_mirrored_roi && in_mirror(angle)) {
                continue;
            }
            let max_r = 0.5 * dims[0].max(dims[1]);
            let distance = rng.gen_range(opts.min_source_distance_m..max_r);
            let p = array.resolve(&Placement::Polar { angle_deg: angle, distance_m: distance });
            let margin = 0.1;
            if p[0] > margin && p[0] < dims[0] - margin && p[1] > margin && p[1] < dims[1] - margin {
                return Ok(Placement::Polar { angle_deg: angle, distance_m: distance });
            }
        }
        Err(Error::Scene(format!(
            "no valid source placement after {} attempts",
            opts.max_attempts
        )))
    };

    let target = place(&mut rng, &|a| in_roi(a), (right, left))?;
    let interferer = place(&mut rng, &|a| !in_roi(a), (0.0, 360.0))?;
    let mut sources = vec![
        SourceSpec::new(Role::Target, SignalSource::SpeechShapedNoise, target),
        SourceSpec::new(Role::Interferer, SignalSource::SpeechShapedNoise, interferer),
    ];
    if opts.with_noise {
        let noise = match opts.noise_placement {
            NoisePlacement::UniformRoom => place(&mut rng, &|_| true, (0.0, 360.0))?,
            NoisePlacement::InsideRoi => place(&mut rng, &|a| in_roi(a), (right, left))?,
            NoisePlacement::OutsideRoi => place(&mut rng, &|a| !in_roi(a), (0.0, 360.0))?,
        };
        sources.push(SourceSpec::new(Role::Noise, SignalSource::WhiteNoise, noise));
    }

    let sir_db = rng.gen_range(opts.sir_range_db.0..=opts.sir_range_db.1);
    let snr_db = Normal::new(opts.snr_db.0, opts.snr_db.1)
        .map_err(|e| Error::Scene(e.to_string()))?
        .sample(&mut rng);
    let level_dbfs = Normal::new(opts.level_dbfs.0, opts.level_dbfs.1)
        .map_err(|e| Error::Scene(e.to_string()))?
        .sample(&mut rng);

    Ok(Scene {
        sample_rate: opts.sample_rate,
        duration_s: opts.duration_s,
        seed,
        room: Room::Shoebox(room),
        array,
        geometry: opts.geometry,
        roi: *roi,
        exclude_mirrored_roi: opts.exclude_mirrored_roi,
        sources,
        sir_db,
        snr_db,
        level_dbfs,
    })
}
