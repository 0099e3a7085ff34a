use std::collections::BTreeMap;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::phase::{PhaseMaskConfig, PhaseMaskEstimator};
use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Roi};

/// What an estimator needs from its host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorInfo {
    pub name: String,
    /// Look-ahead in frames; zero for a causal estimator.
    pub latency_frames: usize,
    pub channels: usize,
    pub complex_output: bool,
}

/// Frame-by-frame mask estimator. The host calls `estimate_frame` once per
/// STFT frame in order, so an implementation sees only past and present
/// frames.
pub trait MaskEstimator: Send {
    fn info(&self) -> EstimatorInfo;

    /// Writes one frame of mask values. `steered` is the second channel with
    /// the steering vector already applied.
    fn estimate_frame(&mut self, reference: &[Complex32], steered: &[Complex32], mask: &mut [Complex32]) -> Result<()>;

    /// Drops any recurrent state before a new utterance.
    fn reset(&mut self) {}
}

/// Construction context shared by every estimator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimatorContext {
    pub roi: Roi,
    pub geometry: ArrayGeometry,
    pub stft: StftConfig,
}

pub trait EstimatorFactory: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    /// `params` is `null` or an object of estimator-specific settings.
    fn build(&self, ctx: &EstimatorContext, params: &Value) -> Result<Box<dyn MaskEstimator>>;
}

/// Estimators registered by name, selected at runtime.
pub struct EstimatorRegistry {
    factories: BTreeMap<&'static str, Box<dyn EstimatorFactory>>,
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(PhaseFactory));
        reg.register(Box::new(AllPassFactory));
        reg.register(Box::new(MuteFactory));
        reg
    }
}

impl EstimatorRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Adds a factory, returning the one it replaced.
    pub fn register(&mut self, factory: Box<dyn EstimatorFactory>) -> Option<Box<dyn EstimatorFactory>> {
        self.factories.insert(factory.name(), factory)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.factories.values().map(|f| (f.name(), f.description())).collect()
    }

    pub fn build(&self, name: &str, ctx: &EstimatorContext, params: &Value) -> Result<Box<dyn MaskEstimator>> {
        self.factories
            .get(name)
            .ok_or_else(|| Error::UnknownEstimator(name.to_string()))?
            .build(ctx, params)
    }
}

fn parse_params<T: Default + serde::de::DeserializeOwned>(name: &str, params: &Value) -> Result<T> {
    if params.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(params.clone()).map_err(|e| Error::Estimator {
        name: name.to_string(),
        msg: format!("invalid parameters: {e}"),
    })
}

fn reject_params(name: &str, params: &Value) -> Result<()> {
    match params {
        Value::Null => Ok(()),
        Value::Object(m) if m.is_empty() => Ok(()),
        _ => Err(Error::Estimator {
            name: name.to_string(),
            msg: "takes no parameters".into(),
        }),
    }
}

struct PhaseFactory;

impl EstimatorFactory for PhaseFactory {
    fn name(&self) -> &'static str {
        PhaseMaskEstimator::NAME
    }

    fn description(&self) -> &'static str {
        "real mask from the inter-microphone phase difference of each bin"
    }

    fn build(&self, ctx: &EstimatorContext, params: &Value) -> Result<Box<dyn MaskEstimator>> {
        let cfg: PhaseMaskConfig = parse_params(self.name(), params)?;
        Ok(Box::new(PhaseMaskEstimator::new(ctx, cfg)?))
    }
}

/// Unit mask everywhere: output equals the reference channel.
#[derive(Debug, Default, Clone)]
pub struct AllPassEstimator;

impl MaskEstimator for AllPassEstimator {
    fn info(&self) -> EstimatorInfo {
        EstimatorInfo {
            name: "all-pass".into(),
            latency_frames: 0,
            channels: 2,
            complex_output: false,
        }
    }

    fn estimate_frame(&mut self, _: &[Complex32], _: &[Complex32], mask: &mut [Complex32]) -> Result<()> {
        mask.fill(Complex32::new(1.0, 0.0));
        Ok(())
    }
}

/// Zero mask everywhere.
#[derive(Debug, Default, Clone)]
pub struct MuteEstimator;

impl MaskEstimator for MuteEstimator {
    fn info(&self) -> EstimatorInfo {
        EstimatorInfo {
            name: "mute".into(),
            latency_frames: 0,
            channels: 2,
            complex_output: false,
        }
    }

    fn estimate_frame(&mut self, _: &[Complex32], _: &[Complex32], mask: &mut [Complex32]) -> Result<()> {
        mask.fill(Complex32::new(0.0, 0.0));
        Ok(())
    }
}

struct AllPassFactory;

impl EstimatorFactory for AllPassFactory {
    fn name(&self) -> &'static str {
        "all-pass"
    }

    fn description(&self) -> &'static str {
        "unit mask; output equals the reference microphone"
    }

    fn build(&self, _: &EstimatorContext, params: &Value) -> Result<Box<dyn MaskEstimator>> {
        reject_params(self.name(), params)?;
        Ok(Box::new(AllPassEstimator))
    }
}

struct MuteFactory;

impl EstimatorFactory for MuteFactory {
    fn name(&self) -> &'static str {
        "mute"
    }

    fn description(&self) -> &'static str {
        "zero mask; silences everything"
    }

    fn build(&self, _: &EstimatorContext, params: &Value) -> Result<Box<dyn MaskEstimator>> {
        reject_params(self.name(), params)?;
        Ok(Box::new(MuteEstimator))
    }
}
