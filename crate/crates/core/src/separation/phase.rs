use std::f32::consts::PI;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use super::estimator::{EstimatorContext, EstimatorInfo, MaskEstimator};
use super::mask::ComplexMask;
use crate::dsp::sqrt_hann;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AliasingMode {
    /// Circular phase distance at every bin; spatial aliasing lets some
    /// outside directions through above the aliasing frequency.
    #[default]
    WrappedDistance,
    /// Unit mask at and above the aliasing frequency.
    PassthroughAboveAlias,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseMaskConfig {
    /// Sharpness of the Gaussian falloff outside the admissible interval.
    pub concentration: f64,
    /// Minimum linear gain.
    pub mask_floor: f64,
    /// Bins below this index pass through.
    pub low_bin_cutoff: usize,
    pub aliasing_mode: AliasingMode,
    /// Bins quieter than this (relative to a full-scale sine) get mask 1.
    pub silence_dbfs: f64,
}

impl Default for PhaseMaskConfig {
    fn default() -> Self {
        Self {
            concentration: 20.0,
            mask_floor: 0.05,
            low_bin_cutoff: 2,
            aliasing_mode: AliasingMode::WrappedDistance,
            silence_dbfs: -80.0,
        }
    }
}

impl PhaseMaskConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Error::Estimator {
            name: PhaseMaskEstimator::NAME.into(),
            msg,
        };
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return Err(bad(format!("concentration must be positive, got {}", self.concentration)));
        }
        if !(0.0..1.0).contains(&self.mask_floor) {
            return Err(bad(format!("mask_floor must lie in [0, 1), got {}", self.mask_floor)));
        }
        if !self.silence_dbfs.is_finite() {
            return Err(bad("silence_dbfs must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct BinRule {
    passthrough: bool,
    centre: f32,
    half_width: f32,
    /// `1 / (2 pi f d / c)`: converts a phase distance to a distance in
    /// direction cosine, which is the same at every frequency.
    inv_scale: f32,
}

/// Deterministic mask from the inter-microphone phase difference. A bin
/// whose phase difference lies inside the ROI's admissible interval gets
/// gain 1; outside, gain falls off as `exp(-concentration * dist^2)` down to
/// the floor, where `dist` is measured in direction cosine.
#[derive(Debug, Clone)]
pub struct PhaseMaskEstimator {
    cfg: PhaseMaskConfig,
    rules: Vec<BinRule>,
    silence_power: f32,
}

impl PhaseMaskEstimator {
    pub const NAME: &'static str = "phase";

    pub fn new(ctx: &EstimatorContext, cfg: PhaseMaskConfig) -> Result<Self> {
        cfg.validate()?;
        ctx.roi.validate()?;
        ctx.geometry.validate()?;
        ctx.stft.validate()?;
        let alias = ctx.geometry.aliasing_frequency();
        let rules = ctx
            .stft
            .frequencies()
            .enumerate()
            .map(|(k, f)| {
                let (lo, hi) = ctx.roi.ipd_interval(f, &ctx.geometry);
                let scale = ctx.geometry.ipd_scale(f);
                let passthrough = k < cfg.low_bin_cutoff
                    || (cfg.aliasing_mode == AliasingMode::PassthroughAboveAlias && f >= alias);
                BinRule {
                    passthrough,
                    centre: ((lo + hi) / 2.0) as f32,
                    half_width: ((hi - lo).abs() / 2.0) as f32,
                    inv_scale: if scale > 0.0 { (1.0 / scale) as f32 } else { 0.0 },
                }
            })
            .collect();
        let window_sum: f64 = sqrt_hann::<f64>(ctx.stft.window_len).iter().sum();
        let full_scale = window_sum / 2.0;
        let silence_amp = full_scale * 10f64.powf(cfg.silence_dbfs / 20.0);
        Ok(Self {
            cfg,
            rules,
            silence_power: (silence_amp * silence_amp) as f32,
        })
    }

    pub fn config(&self) -> &PhaseMaskConfig {
        &self.cfg
    }

    /// Gain for an observed phase difference at bin `k`, ignoring the
    /// silence and pass-through rules.
    pub fn gain_for_phase(&self, k: usize, ipd: f32) -> f32 {
        let r = &self.rules[k];
        let mut off = (ipd - r.centre).rem_euclid(2.0 * PI);
        if off > PI {
            off = 2.0 * PI - off;
        }
        let dist = (off - r.half_width).max(0.0) * r.inv_scale;
        let g = (-(self.cfg.concentration as f32) * dist * dist).exp();
        g.max(self.cfg.mask_floor as f32)
    }
}

impl MaskEstimator for PhaseMaskEstimator {
    fn info(&self) -> EstimatorInfo {
        EstimatorInfo {
            name: Self::NAME.into(),
            latency_frames: 0,
            channels: 2,
            complex_output: false,
        }
    }

    fn estimate_frame(&mut self, reference: &[Complex32], steered: &[Complex32], mask: &mut [Complex32]) -> Result<()> {
        let bins = self.rules.len();
        if reference.len() != bins || steered.len() != bins || mask.len() != bins {
            return Err(Error::Dimension(format!(
                "phase mask expects {bins} bins, got reference {}, steered {}, mask {}",
                reference.len(),
                steered.len(),
                mask.len()
            )));
        }
        for k in 0..bins {
            let (y1, y2) = (reference[k], steered[k]);
            let silent = y1.norm_sqr().max(y2.norm_sqr()) <= self.silence_power;
            let g = if self.rules[k].passthrough || silent {
                1.0
            } else {
                self.gain_for_phase(k, (y2 * y1.conj()).arg())
            };
            mask[k] = Complex32::new(g, 0.0);
        }
        Ok(())
    }
}

/// Offline phase mask over whole channels (frame-major, `steered` already
/// steered).
pub fn estimate_phase_mask(
    reference: &[Complex32],
    steered: &[Complex32],
    ctx: &EstimatorContext,
    cfg: PhaseMaskConfig,
) -> Result<ComplexMask> {
    let bins = ctx.stft.bins();
    if reference.len() != steered.len() || reference.len() % bins != 0 {
        return Err(Error::Dimension(format!(
            "channels of {} and {} values do not form aligned {bins}-bin frames",
            reference.len(),
            steered.len()
        )));
    }
    let frames = reference.len() / bins;
    let mut est = PhaseMaskEstimator::new(ctx, cfg)?;
    let mut mask = ComplexMask::ones(frames, bins);
    for n in 0..frames {
        let span = n * bins..(n + 1) * bins;
        est.estimate_frame(&reference[span.clone()], &steered[span], mask.frame_mut(n))?;
    }
    Ok(mask)
}
