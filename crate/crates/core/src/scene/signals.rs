use std::f64::consts::PI;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::read_wav;
use crate::error::{Error, Result};

/// Mono source material: a WAV file or a built-in deterministic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSource {
    Wav { path: PathBuf },
    WhiteNoise,
    /// White noise shaped to roughly -6 dB/octave above 500 Hz with a
    /// 150 Hz high-pass.
    SpeechShapedNoise,
    /// Speech-shaped noise gated on and off per octave band at a syllabic
    /// rate, so that two such sources rarely dominate the same
    /// time-frequency cell, as with real speech.
    SpeechLike {
        #[serde(default = "default_syllable_rate")]
        syllable_rate_hz: f64,
    },
    Tone {
        freq_hz: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

fn default_syllable_rate() -> f64 {
    4.0
}

fn default_amplitude() -> f64 {
    0.5
}

/// RMS of generated noise signals.
const NOISE_RMS: f64 = 0.1;

impl SignalSource {
    /// Renders exactly `len` samples. WAV material is zero-padded or
    /// truncated; generators are seeded by `seed`.
    pub fn render(&self, len: usize, sample_rate: u32, seed: u64) -> Result<Vec<f32>> {
        match self {
            SignalSource::Wav { path } => {
                let audio = read_wav(path)?;
                if audio.num_channels() != 1 {
                    return Err(Error::Scene(format!(
                        "{} has {} channels; source signals must be mono",
                        path.display(),
                        audio.num_channels()
                    )));
                }
                if audio.sample_rate() != sample_rate {
                    return Err(Error::SampleRate {
                        expected: sample_rate,
                        actual: audio.sample_rate(),
                    });
                }
                let mut s = audio.into_channels().remove(0);
                s.resize(len, 0.0);
                Ok(s)
            }
            SignalSource::WhiteNoise => Ok(white(len, seed)
                .into_iter()
                .map(|v| (v * NOISE_RMS) as f32)
                .collect()),
            SignalSource::SpeechShapedNoise => Ok(speech_shaped(len, sample_rate, seed)),
            SignalSource::SpeechLike { syllable_rate_hz } => {
                if !(*syllable_rate_hz > 0.0) {
                    return Err(Error::Scene(format!(
                        "syllable_rate_hz must be positive, got {syllable_rate_hz}"
                    )));
                }
                speech_like(len, sample_rate, seed, *syllable_rate_hz)
            }
            SignalSource::Tone { freq_hz, amplitude } => Ok((0..len)
                .map(|n| (amplitude * (2.0 * PI * freq_hz * n as f64 / sample_rate as f64).sin()) as f32)
                .collect()),
        }
    }
}

fn white(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn speech_shaped(len: usize, sample_rate: u32, seed: u64) -> Vec<f32> {
    let fs = sample_rate as f64;
    let lp = (-2.0 * PI * 500.0 / fs).exp();
    let hp = (-2.0 * PI * 150.0 / fs).exp();
    let mut y_lp = 0.0;
    let mut x_prev = 0.0;
    let mut y_hp = 0.0;
    let shaped: Vec<f64> = white(len, seed)
        .into_iter()
        .map(|x| {
            y_lp = lp * y_lp + (1.0 - lp) * x;
            y_hp = y_lp - x_prev + hp * y_hp;
            x_prev = y_lp;
            y_hp
        })
        .collect();
    let rms = (shaped.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    let g = if rms > 0.0 { NOISE_RMS / rms } else { 0.0 };
    shaped.into_iter().map(|v| (v * g) as f32).collect()
}

fn speech_like(len: usize, sample_rate: u32, seed: u64, rate_hz: f64) -> Result<Vec<f32>> {
    use crate::dsp::{istft_channel, stft_channel, StftConfig};
    use rand::Rng;

    let cfg = StftConfig {
        sample_rate,
        window_len: 512,
        hop: 256,
        nfft: 512,
        ..Default::default()
    };
    let base: Vec<f64> = speech_shaped(len, sample_rate, seed).into_iter().map(f64::from).collect();
    if len < cfg.window_len {
        return Ok(base.into_iter().map(|v| v as f32).collect());
    }
    let mut spec = stft_channel(&base, &cfg)?;
    let bins = cfg.bins();
    let frames = spec.len() / bins;
    let fs = sample_rate as f64;
    let edges = [0.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, f64::INFINITY];
    // Each band toggles with a mean dwell of half a syllable period.
    let toggle = (cfg.hop as f64 / fs * 2.0 * rate_hz).min(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ee_c411);
    // Shared syllable envelope: pauses silence every band at once.
    let mut voiced = true;
    let mut level: f64 = 1.0;
    for n in 0..frames {
        if rng.gen_bool(toggle) {
            voiced = !voiced;
        }
        level = 0.5 * level + 0.5 * if voiced { 1.0 } else { 0.03 };
        for v in &mut spec[n * bins..(n + 1) * bins] {
            *v *= level;
        }
    }
    for band in edges.windows(2) {
        let ks: Vec<usize> = (0..bins)
            .filter(|&k| {
                let f = k as f64 * fs / cfg.nfft as f64;
                f >= band[0] && f < band[1]
            })
            .collect();
        let mut on = rng.gen_bool(0.5);
        let mut gain: f64 = if on { 1.0 } else { 0.0 };
        for n in 0..frames {
            if rng.gen_bool(toggle) {
                on = !on;
            }
            let target = if on { 1.0 } else { 0.01 };
            gain = 0.5 * gain + 0.5 * target;
            for &k in &ks {
                spec[n * bins + k] *= gain;
            }
        }
    }
    let mut out = istft_channel(&spec, frames, &cfg)?;
    out.resize(len, 0.0);
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    let g = if rms > 0.0 { NOISE_RMS / rms } else { 0.0 };
    Ok(out.into_iter().map(|v| (v * g) as f32).collect())
}
