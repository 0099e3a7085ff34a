use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use super::estimator::MaskEstimator;
use super::mask::{clamp_mask, ComplexMask, DEFAULT_Q_MAX};
use crate::dsp::{istft, stft, MultichannelAudio, Spectrogram, StftConfig, StftProcessor};
use crate::error::{Error, Result};
use crate::geometry::{steered_direction, ArrayGeometry, Roi, SteeringFactors, SteeringState};

/// Output of the offline path.
#[derive(Debug, Clone)]
pub struct Separation {
    /// Single-channel target estimate.
    pub target: Spectrogram<f32>,
    pub mask: ComplexMask,
}

fn estimator_error(est: &dyn MaskEstimator, frame: usize, e: Error) -> Error {
    Error::Estimator {
        name: est.info().name,
        msg: format!("frame {frame}: {e}"),
    }
}

/// Steers the second channel, asks the estimator for a mask frame by frame
/// and applies it to the reference channel. The reference is never
/// phase-shifted.
pub fn separate(mixture: &Spectrogram<f32>, estimator: &mut dyn MaskEstimator, steering: &SteeringState) -> Result<Separation> {
    if mixture.num_channels() != 2 {
        return Err(Error::Dimension(format!(
            "separation needs 2 channels, got {}",
            mixture.num_channels()
        )));
    }
    let bins = mixture.bins();
    let a = steering.vector_f32();
    if a.len() != bins {
        return Err(Error::Dimension(format!(
            "steering vector has {} bins, mixture has {bins}",
            a.len()
        )));
    }
    estimator.reset();
    let frames = mixture.frames();
    let mut mask = ComplexMask::ones(frames, bins);
    let mut target = Spectrogram::zeros(1, frames, bins);
    let mut steered = vec![Complex32::new(0.0, 0.0); bins];
    for n in 0..frames {
        let y1 = mixture.frame(0, n);
        for ((s, y2), w) in steered.iter_mut().zip(mixture.frame(1, n)).zip(a) {
            *s = y2 * w;
        }
        let q = mask.frame_mut(n);
        estimator
            .estimate_frame(y1, &steered, q)
            .map_err(|e| estimator_error(estimator, n, e))?;
        clamp_mask(q, DEFAULT_Q_MAX);
        for ((x, y), q) in target.frame_mut(0, n).iter_mut().zip(y1).zip(q.iter()) {
            *x = q * y;
        }
    }
    Ok(Separation { target, mask })
}

/// Time-domain wrapper around [`separate`]. The input is zero-padded so
/// every sample is covered by two frames; the output has the input's
/// length and no delay.
pub fn separate_audio(
    mixture: &MultichannelAudio,
    estimator: &mut dyn MaskEstimator,
    steering: &SteeringState,
    cfg: &StftConfig,
) -> Result<(MultichannelAudio, ComplexMask)> {
    let pre = cfg.window_len - cfg.hop;
    let n = mixture.len();
    let padded_len = (pre + n).div_ceil(cfg.hop) * cfg.hop + pre;
    let padded = MultichannelAudio::new(
        mixture
            .channels()
            .iter()
            .map(|c| {
                let mut v = vec![0.0; padded_len];
                v[pre..pre + n].copy_from_slice(c);
                v
            })
            .collect(),
        mixture.sample_rate(),
    )?;
    let spec = stft(&padded, cfg)?;
    let Separation { target, mask } = separate(&spec, estimator, steering)?;
    let mut out = istft(&target, cfg)?.into_channels().swap_remove(0);
    out.drain(..pre);
    out.truncate(n);
    Ok((MultichannelAudio::mono(out, cfg.sample_rate), mask))
}

/// Returned by a successful steering update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringAck {
    pub gamma_deg: f64,
    pub theta2_deg: f64,
}

#[derive(Debug)]
struct SteeringSlot {
    gamma_bits: AtomicU64,
    theta1_deg: f64,
}

/// Cheap, cloneable handle for changing the steering angle from any thread.
/// The new angle is published with one atomic store; the processing thread
/// picks it up at its next frame boundary, so a frame sees either the old or
/// the new steering vector in full.
#[derive(Debug, Clone)]
pub struct SteeringHandle {
    slot: Arc<SteeringSlot>,
}

impl SteeringHandle {
    /// Rejects an invalid angle without touching the running state.
    pub fn set_steering(&self, gamma_deg: f64) -> Result<SteeringAck> {
        let theta2_deg = steered_direction(self.slot.theta1_deg, gamma_deg)?;
        self.slot.gamma_bits.store(gamma_deg.to_bits(), Ordering::Release);
        Ok(SteeringAck { gamma_deg, theta2_deg })
    }

    /// Most recently requested steering angle.
    pub fn gamma_deg(&self) -> f64 {
        f64::from_bits(self.slot.gamma_bits.load(Ordering::Acquire))
    }
}

/// Frame-by-frame causal separation with `window_len - hop` samples of
/// latency. Feed one hop of both channels per call; get one hop back.
pub struct StreamingPipeline {
    cfg: StftConfig,
    geometry: ArrayGeometry,
    processor: StftProcessor<f32>,
    estimator: Box<dyn MaskEstimator>,
    slot: Arc<SteeringSlot>,
    applied_bits: u64,
    steering: SteeringFactors,
    input: [Vec<f32>; 2],
    spec: [Vec<Complex32>; 2],
    mask: Vec<Complex32>,
    frame: Vec<f32>,
    overlap: Vec<f32>,
    frames_processed: u64,
}

impl StreamingPipeline {
    pub fn new(cfg: StftConfig, roi: Roi, geometry: ArrayGeometry, estimator: Box<dyn MaskEstimator>) -> Result<Self> {
        roi.validate()?;
        geometry.validate()?;
        let processor = StftProcessor::new(cfg)?;
        let bins = cfg.bins();
        Ok(Self {
            processor,
            estimator,
            slot: Arc::new(SteeringSlot {
                gamma_bits: AtomicU64::new(0f64.to_bits()),
                theta1_deg: roi.center_deg,
            }),
            applied_bits: 0f64.to_bits(),
            steering: SteeringFactors::identity(bins),
            input: [vec![0.0; cfg.window_len], vec![0.0; cfg.window_len]],
            spec: [vec![Complex32::new(0.0, 0.0); bins], vec![Complex32::new(0.0, 0.0); bins]],
            mask: vec![Complex32::new(1.0, 0.0); bins],
            frame: vec![0.0; cfg.window_len],
            overlap: vec![0.0; cfg.window_len],
            frames_processed: 0,
            geometry,
            cfg,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn hop(&self) -> usize {
        self.cfg.hop
    }

    /// Algorithmic latency in samples.
    pub fn latency(&self) -> usize {
        self.cfg.latency()
    }

    pub fn frames_processed(&self) -> u64 {
        self.frames_processed
    }

    pub fn estimator_name(&self) -> String {
        self.estimator.info().name
    }

    pub fn steering_handle(&self) -> SteeringHandle {
        SteeringHandle {
            slot: Arc::clone(&self.slot),
        }
    }

    pub fn set_steering(&self, gamma_deg: f64) -> Result<SteeringAck> {
        self.steering_handle().set_steering(gamma_deg)
    }

    /// Steering angle in effect for the most recent frame.
    pub fn applied_gamma_deg(&self) -> f64 {
        f64::from_bits(self.applied_bits)
    }

    /// Clamped mask applied to the most recent frame.
    pub fn last_mask(&self) -> &[Complex32] {
        &self.mask
    }

    /// Clears audio history and estimator state; steering is kept.
    pub fn reset(&mut self) {
        self.input.iter_mut().for_each(|b| b.fill(0.0));
        self.overlap.fill(0.0);
        self.estimator.reset();
        self.frames_processed = 0;
    }

    fn sync_steering(&mut self) {
        let bits = self.slot.gamma_bits.load(Ordering::Acquire);
        if bits != self.applied_bits {
            let theta1 = self.slot.theta1_deg;
            let theta2 = theta1 - f64::from_bits(bits);
            self.steering.update(theta1, theta2, &self.geometry, &self.cfg);
            self.applied_bits = bits;
        }
    }

    /// Consumes one hop of each channel and writes one hop of output.
    pub fn process_frame(&mut self, reference: &[f32], second: &[f32], out: &mut [f32]) -> Result<()> {
        let hop = self.cfg.hop;
        if reference.len() != hop || second.len() != hop || out.len() != hop {
            return Err(Error::Dimension(format!(
                "process_frame expects {hop} samples per channel, got {}, {} and output {}",
                reference.len(),
                second.len(),
                out.len()
            )));
        }
        self.sync_steering();
        let len = self.cfg.window_len;
        for (buf, new) in self.input.iter_mut().zip([reference, second]) {
            buf.copy_within(hop.., 0);
            buf[len - hop..].copy_from_slice(new);
        }
        for c in 0..2 {
            self.processor.analyze(&self.input[c], &mut self.spec[c]);
        }
        self.steering.apply(&mut self.spec[1]);
        let frame_idx = self.frames_processed as usize;
        if let Err(e) = self.estimator.estimate_frame(&self.spec[0], &self.spec[1], &mut self.mask) {
            return Err(estimator_error(self.estimator.as_ref(), frame_idx, e));
        }
        clamp_mask(&mut self.mask, DEFAULT_Q_MAX);
        for (y, q) in self.spec[0].iter_mut().zip(&self.mask) {
            *y *= q;
        }
        self.processor.synthesize(&self.spec[0], &mut self.frame);
        for (o, v) in self.overlap.iter_mut().zip(&self.frame) {
            *o += v;
        }
        out.copy_from_slice(&self.overlap[..hop]);
        self.overlap.copy_within(hop.., 0);
        self.overlap[len - hop..].fill(0.0);
        self.frames_processed += 1;
        Ok(())
    }

    /// Streams a whole two-channel recording through `process_frame`. The
    /// returned signal is delayed by [`Self::latency`] samples and has the
    /// input's length; a trailing partial hop is zero-padded.
    pub fn process_audio(&mut self, mixture: &MultichannelAudio) -> Result<Vec<f32>> {
        if mixture.num_channels() != 2 {
            return Err(Error::Dimension(format!(
                "streaming needs 2 channels, got {}",
                mixture.num_channels()
            )));
        }
        let hop = self.cfg.hop;
        let n = mixture.len();
        let mut out = vec![0.0; n.div_ceil(hop) * hop];
        let (mut a, mut b) = (vec![0.0; hop], vec![0.0; hop]);
        for (i, chunk) in out.chunks_exact_mut(hop).enumerate() {
            let start = i * hop;
            let end = (start + hop).min(n);
            a.fill(0.0);
            b.fill(0.0);
            a[..end - start].copy_from_slice(&mixture.channel(0)[start..end]);
            b[..end - start].copy_from_slice(&mixture.channel(1)[start..end]);
            self.process_frame(&a, &b, chunk)?;
        }
        out.truncate(n);
        Ok(out)
    }
}
