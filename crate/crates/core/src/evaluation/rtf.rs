use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::metrics::Aggregate;
use crate::dsp::MultichannelAudio;
use crate::error::Result;
use crate::separation::StreamingPipeline;

/// Anything that can be timed on a two-channel clip.
pub trait ClipProcessor {
    fn process_clip(&mut self, clip: &MultichannelAudio) -> Result<()>;
}

impl ClipProcessor for StreamingPipeline {
    fn process_clip(&mut self, clip: &MultichannelAudio) -> Result<()> {
        self.reset();
        self.process_audio(clip).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtfReport {
    pub mean: f64,
    pub std: f64,
    pub clips: usize,
    pub clip_len_s: f64,
}

/// Two channels of independent Gaussian noise (RMS 0.1), one per seed.
pub fn noise_clip(seed: u64, len_s: f64, sample_rate: u32) -> MultichannelAudio {
    let n = (len_s * sample_rate as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f32, 0.1).expect("valid parameters");
    let chans = (0..2).map(|_| (0..n).map(|_| normal.sample(&mut rng)).collect()).collect();
    MultichannelAudio::new(chans, sample_rate).expect("equal lengths")
}

/// Mean and spread of processing time over audio duration, one clip at a
/// time. Clip generation is not timed.
pub fn measure_rtf<P: ClipProcessor + ?Sized>(
    processor: &mut P,
    clips: usize,
    clip_len_s: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<RtfReport> {
    let mut ratios = Vec::with_capacity(clips);
    for i in 0..clips {
        let clip = noise_clip(seed.wrapping_add(i as u64), clip_len_s, sample_rate);
        let start = Instant::now();
        processor.process_clip(&clip)?;
        ratios.push(start.elapsed().as_secs_f64() / clip.duration_s());
    }
    let agg = Aggregate::from_values(&ratios).unwrap_or(Aggregate {
        mean: 0.0,
        std: 0.0,
        count: 0,
    });
    Ok(RtfReport {
        mean: agg.mean,
        std: agg.std,
        clips,
        clip_len_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    struct Sleeper(Duration);

    impl ClipProcessor for Sleeper {
        fn process_clip(&mut self, _: &MultichannelAudio) -> Result<()> {
            std::thread::sleep(self.0);
            Ok(())
        }
    }

    #[test]
    fn sleeping_fixture_gives_expected_ratio() {
        // 100 ms of sleep per 1 s clip stands in for 1 s per 10 s.
        let r = measure_rtf(&mut Sleeper(Duration::from_millis(100)), 3, 1.0, 16000, 0).unwrap();
        assert!((r.mean - 0.1).abs() < 0.03, "{r:?}");
        assert_eq!(r.clips, 3);
    }

    #[test]
    fn clips_are_deterministic() {
        assert_eq!(noise_clip(3, 0.1, 16000), noise_clip(3, 0.1, 16000));
        assert_ne!(noise_clip(3, 0.1, 16000), noise_clip(4, 0.1, 16000));
    }
}
