use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{Float, Zero};
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use super::MultichannelAudio;
use crate::error::{Error, Result};

/// Sample type accepted by the STFT: `f32` on the streaming path, `f64` for
/// verification.
pub trait Real: realfft::FftNum + Float + Default + Into<f64> + Debug {}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    #[default]
    SqrtHann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub sample_rate: u32,
    pub window_len: usize,
    pub hop: usize,
    pub nfft: usize,
    pub window_kind: WindowKind,
}

impl Default for StftConfig {
    /// 16 kHz, 20 ms square-root Hann window, 50% overlap, 320-point FFT.
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            window_len: 320,
            hop: 160,
            nfft: 320,
            window_kind: WindowKind::SqrtHann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::StftConfig("sample_rate must be positive".into()));
        }
        if self.window_len == 0 || self.hop == 0 {
            return Err(Error::StftConfig("window_len and hop must be positive".into()));
        }
        // Square-root Hann analysis + synthesis is only COLA at 50% overlap.
        if self.hop * 2 != self.window_len {
            return Err(Error::StftConfig(format!(
                "hop ({}) must be half of window_len ({})",
                self.hop, self.window_len
            )));
        }
        if self.nfft < self.window_len {
            return Err(Error::StftConfig(format!(
                "nfft ({}) must be >= window_len ({})",
                self.nfft, self.window_len
            )));
        }
        Ok(())
    }

    /// One-sided bin count K.
    pub fn bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    /// Algorithmic latency of frame-by-frame processing in samples.
    pub fn latency(&self) -> usize {
        self.window_len - self.hop
    }

    pub fn frame_duration_s(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.bins()).map(move |k| k as f64 * self.sample_rate as f64 / self.nfft as f64)
    }
}

/// Centre frequency of bin `k` in Hz.
pub fn bin_frequency(k: usize, cfg: &StftConfig) -> Result<f64> {
    let bins = cfg.bins();
    if k >= bins {
        return Err(Error::BinOutOfRange { k, bins });
    }
    Ok(k as f64 * cfg.sample_rate as f64 / cfg.nfft as f64)
}

/// Number of full frames for a signal of `len` samples (no edge padding).
pub fn frame_count(len: usize, cfg: &StftConfig) -> usize {
    if len < cfg.window_len {
        0
    } else {
        (len - cfg.window_len) / cfg.hop + 1
    }
}

/// Periodic square-root Hann window, `sin(pi n / L)`.
pub fn sqrt_hann<T: Real>(len: usize) -> Vec<T> {
    (0..len)
        .map(|n| T::from((PI * n as f64 / len as f64).sin()).unwrap())
        .collect()
}

/// Complex STFT values for one or more channels, stored channel-major then
/// frame-major: `data[(c * frames + n) * bins + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T = f32> {
    frames: usize,
    bins: usize,
    channels: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Spectrogram<T> {
    pub fn zeros(channels: usize, frames: usize, bins: usize) -> Self {
        Self {
            frames,
            bins,
            channels,
            data: vec![Complex::zero(); channels * frames * bins],
        }
    }

    pub fn from_channels(channels: Vec<Vec<Complex<T>>>, frames: usize, bins: usize) -> Result<Self> {
        let expected = frames * bins;
        if let Some((i, c)) = channels.iter().enumerate().find(|(_, c)| c.len() != expected) {
            return Err(Error::Dimension(format!(
                "channel {i} has {} values, expected {frames}x{bins}",
                c.len()
            )));
        }
        let n = channels.len();
        Ok(Self {
            frames,
            bins,
            channels: n,
            data: channels.into_iter().flatten().collect(),
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }

    pub fn channel(&self, c: usize) -> &[Complex<T>] {
        let len = self.frames * self.bins;
        &self.data[c * len..(c + 1) * len]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex<T>] {
        let len = self.frames * self.bins;
        &mut self.data[c * len..(c + 1) * len]
    }

    pub fn frame(&self, c: usize, n: usize) -> &[Complex<T>] {
        let start = (c * self.frames + n) * self.bins;
        &self.data[start..start + self.bins]
    }

    pub fn frame_mut(&mut self, c: usize, n: usize) -> &mut [Complex<T>] {
        let start = (c * self.frames + n) * self.bins;
        &mut self.data[start..start + self.bins]
    }

    /// Copies out a single channel as its own spectrogram.
    pub fn extract_channel(&self, c: usize) -> Self {
        Self {
            frames: self.frames,
            bins: self.bins,
            channels: 1,
            data: self.channel(c).to_vec(),
        }
    }
}

/// Reusable forward/inverse transforms for one configuration.
pub struct StftProcessor<T: Real> {
    cfg: StftConfig,
    window: Vec<T>,
    forward: Arc<dyn RealToComplex<T>>,
    inverse: Arc<dyn ComplexToReal<T>>,
    time_buf: Vec<T>,
    freq_buf: Vec<Complex<T>>,
    fwd_scratch: Vec<Complex<T>>,
    inv_scratch: Vec<Complex<T>>,
    inv_scale: T,
}

impl<T: Real> StftProcessor<T> {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = RealFftPlanner::<T>::new();
        let forward = planner.plan_fft_forward(cfg.nfft);
        let inverse = planner.plan_fft_inverse(cfg.nfft);
        Ok(Self {
            window: sqrt_hann(cfg.window_len),
            time_buf: forward.make_input_vec(),
            freq_buf: forward.make_output_vec(),
            fwd_scratch: forward.make_scratch_vec(),
            inv_scratch: inverse.make_scratch_vec(),
            inv_scale: T::one() / T::from(cfg.nfft).unwrap(),
            cfg,
            forward,
            inverse,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    /// Windows `frame` (exactly `window_len` samples) and writes K bins.
    pub fn analyze(&mut self, frame: &[T], out: &mut [Complex<T>]) {
        debug_assert_eq!(frame.len(), self.cfg.window_len);
        debug_assert_eq!(out.len(), self.cfg.bins());
        for ((dst, &x), &w) in self.time_buf.iter_mut().zip(frame).zip(&self.window) {
            *dst = x * w;
        }
        self.time_buf[self.cfg.window_len..]
            .iter_mut()
            .for_each(|v| *v = T::zero());
        self.forward
            .process_with_scratch(&mut self.time_buf, out, &mut self.fwd_scratch)
            .expect("buffer sizes fixed at construction");
    }

    /// Inverse transform of K bins followed by the synthesis window; writes
    /// `window_len` samples ready for overlap-add.
    pub fn synthesize(&mut self, spec: &[Complex<T>], out: &mut [T]) {
        debug_assert_eq!(spec.len(), self.cfg.bins());
        debug_assert_eq!(out.len(), self.cfg.window_len);
        self.freq_buf.copy_from_slice(spec);
        // A real signal has purely real DC and Nyquist bins.
        let last = self.freq_buf.len() - 1;
        self.freq_buf[0].im = T::zero();
        if self.cfg.nfft % 2 == 0 {
            self.freq_buf[last].im = T::zero();
        }
        self.inverse
            .process_with_scratch(&mut self.freq_buf, &mut self.time_buf, &mut self.inv_scratch)
            .expect("buffer sizes fixed at construction");
        for ((dst, &x), &w) in out.iter_mut().zip(&self.time_buf).zip(&self.window) {
            *dst = x * w * self.inv_scale;
        }
    }
}

/// STFT of a single channel, frame-major `N x K`.
pub fn stft_channel<T: Real>(samples: &[T], cfg: &StftConfig) -> Result<Vec<Complex<T>>> {
    cfg.validate()?;
    if samples.len() < cfg.window_len {
        return Err(Error::TooShort {
            needed: cfg.window_len,
            actual: samples.len(),
        });
    }
    let frames = frame_count(samples.len(), cfg);
    let bins = cfg.bins();
    let mut proc = StftProcessor::<T>::new(*cfg)?;
    let mut out = vec![Complex::zero(); frames * bins];
    for (n, dst) in out.chunks_exact_mut(bins).enumerate() {
        let start = n * cfg.hop;
        proc.analyze(&samples[start..start + cfg.window_len], dst);
    }
    Ok(out)
}

/// Overlap-add synthesis of one channel; output has
/// `(frames - 1) * hop + window_len` samples.
pub fn istft_channel<T: Real>(spec: &[Complex<T>], frames: usize, cfg: &StftConfig) -> Result<Vec<T>> {
    cfg.validate()?;
    let bins = cfg.bins();
    if spec.len() != frames * bins {
        return Err(Error::Dimension(format!(
            "spectrogram has {} values, expected {frames} frames x {bins} bins",
            spec.len()
        )));
    }
    if frames == 0 {
        return Ok(Vec::new());
    }
    let mut proc = StftProcessor::<T>::new(*cfg)?;
    let mut out = vec![T::zero(); (frames - 1) * cfg.hop + cfg.window_len];
    let mut frame = vec![T::zero(); cfg.window_len];
    for (n, bins) in spec.chunks_exact(bins).enumerate() {
        proc.synthesize(bins, &mut frame);
        let start = n * cfg.hop;
        for (o, &v) in out[start..start + cfg.window_len].iter_mut().zip(&frame) {
            *o = *o + v;
        }
    }
    Ok(out)
}

pub fn stft(audio: &MultichannelAudio, cfg: &StftConfig) -> Result<Spectrogram<f32>> {
    cfg.validate()?;
    if audio.sample_rate() != cfg.sample_rate {
        return Err(Error::SampleRate {
            expected: cfg.sample_rate,
            actual: audio.sample_rate(),
        });
    }
    if audio.is_empty() {
        return Err(Error::TooShort {
            needed: cfg.window_len,
            actual: 0,
        });
    }
    let channels = audio
        .channels()
        .iter()
        .map(|c| stft_channel(c, cfg))
        .collect::<Result<Vec<_>>>()?;
    Spectrogram::from_channels(channels, frame_count(audio.len(), cfg), cfg.bins())
}

pub fn istft(spec: &Spectrogram<f32>, cfg: &StftConfig) -> Result<MultichannelAudio> {
    if spec.bins() != cfg.bins() {
        return Err(Error::Dimension(format!(
            "spectrogram has {} bins, config expects {}",
            spec.bins(),
            cfg.bins()
        )));
    }
    let channels = (0..spec.num_channels())
        .map(|c| istft_channel(spec.channel(c), spec.frames(), cfg))
        .collect::<Result<Vec<_>>>()?;
    MultichannelAudio::new(channels, cfg.sample_rate)
}
