//! Deterministic two-microphone scene synthesis.
//!
//! A [`Scene`] lists sources with roles and placements inside either a free
//! field or a shoebox room. [`mix_scene`] renders every source at the array,
//! scales interferers and noise to the requested SIR/SNR on the reference
//! channel and normalises the mixture level.

mod farfield;
mod mix;
mod sampler;
mod shoebox;
mod signals;
mod types;

pub use farfield::{fractional_delay, simulate_far_field};
pub use mix::{mix_scene, render_source, rms_dbfs, MixOutput};
pub use sampler::{sample_training_scene, NoisePlacement, SamplerOptions};
pub use shoebox::{
    image_source_rir, sabine_absorption, schroeder_decay_db, simulate_shoebox, ShoeboxRoom,
    SINC_TAPS,
};
pub use signals::SignalSource;
pub use types::{ArrayPose, Placement, Role, Room, Scene, SourceSpec};
