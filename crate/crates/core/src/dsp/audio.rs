use crate::error::{Error, Result};

/// Equal-length channels at a common sample rate.
///
/// Channel 0 is the left (reference) microphone, channel 1 the second
/// microphone whose spectrum receives the steering vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelAudio {
    channels: Vec<Vec<f32>>,
    sample_rate: u32,
}

impl MultichannelAudio {
    pub fn new(channels: Vec<Vec<f32>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Dimension("audio needs at least one channel".into()));
        }
        let len = channels[0].len();
        if let Some((i, c)) = channels.iter().enumerate().find(|(_, c)| c.len() != len) {
            return Err(Error::Dimension(format!(
                "channel {i} has {} samples, channel 0 has {len}",
                c.len()
            )));
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self {
            channels: vec![samples],
            sample_rate,
        }
    }

    pub fn silent(num_channels: usize, len: usize, sample_rate: u32) -> Self {
        Self {
            channels: vec![vec![0.0; len]; num_channels.max(1)],
            sample_rate,
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, idx: usize) -> &[f32] {
        &self.channels[idx]
    }

    pub fn channel_mut(&mut self, idx: usize) -> &mut [f32] {
        &mut self.channels[idx]
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f32>> {
        self.channels
    }

    /// Multiplies every sample by `gain`.
    pub fn scale(&mut self, gain: f32) {
        for c in &mut self.channels {
            c.iter_mut().for_each(|s| *s *= gain);
        }
    }

    pub fn scaled(&self, gain: f32) -> Self {
        let mut out = self.clone();
        out.scale(gain);
        out
    }

    /// Sample-wise sum; shapes must agree.
    pub fn add_assign(&mut self, other: &MultichannelAudio) -> Result<()> {
        if other.num_channels() != self.num_channels() || other.len() != self.len() {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} audio to {}x{}",
                other.num_channels(),
                other.len(),
                self.num_channels(),
                self.len()
            )));
        }
        for (a, b) in self.channels.iter_mut().zip(&other.channels) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
        Ok(())
    }

    /// Energy of one channel, accumulated in f64.
    pub fn channel_energy(&self, idx: usize) -> f64 {
        self.channels[idx]
            .iter()
            .map(|&s| (s as f64) * (s as f64))
            .sum()
    }

    pub fn peak(&self) -> f32 {
        self.channels
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f32, |m, s| m.max(s.abs()))
    }
}
