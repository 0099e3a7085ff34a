use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid STFT configuration: {0}")]
    StftConfig(String),

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRate { expected: u32, actual: u32 },

    #[error("input too short: need at least {needed} samples, got {actual}")]
    TooShort { needed: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("bin index {k} out of range (bin count {bins})")]
    BinOutOfRange { k: usize, bins: usize },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid steering angle gamma={gamma_deg} deg: theta2={theta2_deg} deg is outside (0, 180)")]
    Steering { gamma_deg: f64, theta2_deg: f64 },

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("WAV error in {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("scene error: {0}")]
    Scene(String),

    #[error("scene file {path}: {msg}")]
    SceneFile { path: PathBuf, msg: String },

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("mask estimator '{name}' failed: {msg}")]
    Estimator { name: String, msg: String },

    #[error("unknown mask estimator '{0}'")]
    UnknownEstimator(String),

    #[error("metric undefined: {0}")]
    Metric(String),
}
