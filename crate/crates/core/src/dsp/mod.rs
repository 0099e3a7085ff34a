//! Time-frequency plumbing: STFT analysis/synthesis with a square-root Hann
//! window, multichannel audio buffers and WAV I/O.

mod audio;
mod stft;
mod wav;

pub use audio::MultichannelAudio;
pub use stft::{
    bin_frequency, frame_count, istft, istft_channel, sqrt_hann, stft, stft_channel, Real,
    Spectrogram, StftConfig, StftProcessor, WindowKind,
};
pub use wav::{read_wav, write_wav, WavEncoding};
