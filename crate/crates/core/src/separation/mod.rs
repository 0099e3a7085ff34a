//! Mask-based separation with inference-time steering.
//!
//! The second microphone is multiplied by the steering vector, a
//! [`MaskEstimator`] turns both channels into a mask, and the mask is
//! applied to the reference microphone.

mod estimator;
mod mask;
mod phase;
mod pipeline;

pub use estimator::{
    AllPassEstimator, EstimatorContext, EstimatorFactory, EstimatorInfo, EstimatorRegistry, MaskEstimator, MuteEstimator,
};
pub use mask::{clamp_mask, ComplexMask, DEFAULT_Q_MAX};
pub use phase::{estimate_phase_mask, AliasingMode, PhaseMaskConfig, PhaseMaskEstimator};
pub use pipeline::{separate, separate_audio, Separation, SteeringAck, SteeringHandle, StreamingPipeline};
