use serde::Serialize;

use super::{simulate_far_field, simulate_shoebox, Role, Room, Scene};
use crate::dsp::MultichannelAudio;
use crate::error::{Error, Result};

/// Mixture plus identically scaled ground-truth stems.
#[derive(Debug, Clone)]
pub struct MixOutput {
    pub mixture: MultichannelAudio,
    pub target: MultichannelAudio,
    pub interferer: MultichannelAudio,
    pub noise: MultichannelAudio,
    /// Each source as it appears in the mixture, in scene order.
    pub sources: Vec<MultichannelAudio>,
    pub gains: MixGains,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixGains {
    pub interferer: f64,
    pub noise: f64,
    pub level: f64,
}

/// Per-source generator seed derived from the scene seed.
fn source_seed(scene_seed: u64, idx: usize) -> u64 {
    // splitmix64 step
    let mut z = scene_seed.wrapping_add((idx as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Renders one source at both microphones without any mixing gain.
pub fn render_source(scene: &Scene, idx: usize) -> Result<MultichannelAudio> {
    let len = scene.num_samples();
    let src = &scene.sources[idx];
    let sig = src.signal.render(len, scene.sample_rate, source_seed(scene.seed, idx))?;
    match &scene.room {
        Room::Anechoic => Ok(simulate_far_field(
            &sig,
            scene.source_angle(idx),
            &scene.geometry,
            scene.sample_rate,
        )),
        Room::Shoebox(_) => {
            let mut single = scene.clone();
            single.sources = vec![src.clone()];
            Ok(simulate_shoebox(&single, &[sig], None)?.remove(0))
        }
    }
}

fn render_all(scene: &Scene) -> Result<Vec<MultichannelAudio>> {
    let len = scene.num_samples();
    let signals = scene
        .sources
        .iter()
        .enumerate()
        .map(|(i, s)| s.signal.render(len, scene.sample_rate, source_seed(scene.seed, i)))
        .collect::<Result<Vec<_>>>()?;
    match &scene.room {
        Room::Anechoic => Ok(signals
            .iter()
            .enumerate()
            .map(|(i, sig)| simulate_far_field(sig, scene.source_angle(i), &scene.geometry, scene.sample_rate))
            .collect()),
        Room::Shoebox(_) => simulate_shoebox(scene, &signals, None),
    }
}

/// RMS level of a signal in dBFS (full scale = 1.0).
pub fn rms_dbfs(x: &[f32]) -> f64 {
    let e: f64 = x.iter().map(|&v| (v as f64).powi(2)).sum();
    10.0 * (e / x.len().max(1) as f64).log10()
}

/// Renders and mixes a scene. Interferers are scaled to `sir_db` and noise to
/// `snr_db` relative to the target sum on the reference channel; the
/// mixture is then scaled to an RMS of `level_dbfs` on that channel.
pub fn mix_scene(scene: &Scene) -> Result<MixOutput> {
    scene.validate()?;
    let rendered = render_all(scene)?;
    let (len, fs) = (scene.num_samples(), scene.sample_rate);
    let mut sums = [
        MultichannelAudio::silent(2, len, fs),
        MultichannelAudio::silent(2, len, fs),
        MultichannelAudio::silent(2, len, fs),
    ];
    let slot = |r: Role| match r {
        Role::Target => 0,
        Role::Interferer => 1,
        Role::Noise => 2,
    };
    for (src, audio) in scene.sources.iter().zip(&rendered) {
        sums[slot(src.role)].add_assign(audio)?;
    }
    let e_target = sums[0].channel_energy(0);
    if !(e_target > 0.0) {
        return Err(Error::Scene("target is silent at the reference microphone; SIR undefined".into()));
    }
    let gain_for = |energy: f64, ratio_db: f64| {
        if energy > 0.0 {
            (e_target / (energy * 10f64.powf(ratio_db / 10.0))).sqrt()
        } else {
            0.0
        }
    };
    let g_int = gain_for(sums[1].channel_energy(0), scene.sir_db);
    let g_noise = gain_for(sums[2].channel_energy(0), scene.snr_db);

    let mut mixture = sums[0].clone();
    mixture.add_assign(&sums[1].scaled(g_int as f32))?;
    mixture.add_assign(&sums[2].scaled(g_noise as f32))?;
    let rms = (mixture.channel_energy(0) / len as f64).sqrt();
    let g_level = 10f64.powf(scene.level_dbfs / 20.0) / rms;

    let role_gain = |r: Role| match r {
        Role::Target => g_level,
        Role::Interferer => g_int * g_level,
        Role::Noise => g_noise * g_level,
    };
    let sources = scene
        .sources
        .iter()
        .zip(&rendered)
        .map(|(s, a)| a.scaled(role_gain(s.role) as f32))
        .collect();
    let [target, interferer, noise] = sums;
    // Rebuild the mixture from scaled stems so that it equals their sum.
    let target = target.scaled(g_level as f32);
    let interferer = interferer.scaled((g_int * g_level) as f32);
    let noise = noise.scaled((g_noise * g_level) as f32);
    let mut mixture = target.clone();
    mixture.add_assign(&interferer)?;
    mixture.add_assign(&noise)?;
    Ok(MixOutput {
        mixture,
        target,
        interferer,
        noise,
        sources,
        gains: MixGains {
            interferer: g_int,
            noise: g_noise,
            level: g_level,
        },
    })
}
