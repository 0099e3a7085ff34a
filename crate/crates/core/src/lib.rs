//! Area-based two-microphone source separation with an ROI that can be
//! steered at inference time by a per-bin phase shift on the second channel.
//!
//! Module map:
//! - [`dsp`]: STFT analysis/synthesis and WAV I/O
//! - [`geometry`]: IPDs, steering vectors and steered ROI boundaries
//! - [`scene`]: far-field and shoebox simulation, mixing, scene sampling
//! - [`separation`]: mask estimators, offline and streaming pipelines
//! - [`evaluation`]: PR, SI-SDR, heatmaps, steering sweeps and RTF

pub mod dsp;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod scene;
pub mod separation;

pub use error::{Error, Result};
