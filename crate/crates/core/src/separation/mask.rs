use num_complex::Complex32;

use crate::error::{Error, Result};

/// Magnitude clamp applied to every estimator output.
pub const DEFAULT_Q_MAX: f32 = 2.0;

/// Complex separation mask, frame-major `N x K`, applied to the reference
/// channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMask {
    frames: usize,
    bins: usize,
    values: Vec<Complex32>,
}

impl ComplexMask {
    /// All-ones mask.
    pub fn ones(frames: usize, bins: usize) -> Self {
        Self {
            frames,
            bins,
            values: vec![Complex32::new(1.0, 0.0); frames * bins],
        }
    }

    pub fn from_values(frames: usize, bins: usize, values: Vec<Complex32>) -> Result<Self> {
        if values.len() != frames * bins {
            return Err(Error::Dimension(format!(
                "mask has {} values, expected {frames} x {bins}",
                values.len()
            )));
        }
        Ok(Self { frames, bins, values })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn values(&self) -> &[Complex32] {
        &self.values
    }

    pub fn frame(&self, n: usize) -> &[Complex32] {
        &self.values[n * self.bins..(n + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, n: usize) -> &mut [Complex32] {
        &mut self.values[n * self.bins..(n + 1) * self.bins]
    }

    pub fn get(&self, n: usize, k: usize) -> Complex32 {
        self.values[n * self.bins + k]
    }

    /// Smallest and largest magnitude over all cells.
    pub fn magnitude_range(&self) -> (f32, f32) {
        self.values
            .iter()
            .map(|q| q.norm())
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), m| (lo.min(m), hi.max(m)))
    }

    /// Mean magnitude over frames for each bin.
    pub fn mean_magnitude_per_bin(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.bins];
        for frame in self.values.chunks_exact(self.bins.max(1)) {
            for (a, q) in acc.iter_mut().zip(frame) {
                *a += q.norm() as f64;
            }
        }
        let n = self.frames.max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// Scales any value whose magnitude exceeds `q_max` back onto the circle,
/// keeping its phase. Non-finite values become zero.
pub fn clamp_mask(values: &mut [Complex32], q_max: f32) {
    for q in values {
        if !(q.re.is_finite() && q.im.is_finite()) {
            *q = Complex32::new(0.0, 0.0);
            continue;
        }
        let m = q.norm();
        if m > q_max {
            *q *= q_max / m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_keeps_phase() {
        let mut v = vec![Complex32::new(3.0, 4.0), Complex32::new(0.5, 0.0), Complex32::new(f32::NAN, 0.0)];
        clamp_mask(&mut v, DEFAULT_Q_MAX);
        assert!((v[0].norm() - 2.0).abs() < 1e-6);
        assert!((v[0].arg() - (4.0f32).atan2(3.0)).abs() < 1e-6);
        assert_eq!(v[1], Complex32::new(0.5, 0.0));
        assert_eq!(v[2], Complex32::new(0.0, 0.0));
    }

    #[test]
    fn shape_checked() {
        assert!(ComplexMask::from_values(2, 3, vec![Complex32::new(1.0, 0.0); 5]).is_err());
        let m = ComplexMask::ones(2, 3);
        assert_eq!(m.magnitude_range(), (1.0, 1.0));
        assert_eq!(m.mean_magnitude_per_bin(), vec![1.0; 3]);
    }
}
