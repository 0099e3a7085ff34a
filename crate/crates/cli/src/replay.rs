use num_complex::Complex32;
use steerbeam_core::separation::{ComplexMask, EstimatorInfo, MaskEstimator};
use steerbeam_core::{Error, Result};

/// Plays back a previously estimated mask, so that a stem can be passed
/// through exactly the gains the mixture received.
pub struct ReplayEstimator {
    mask: ComplexMask,
    next: usize,
}

impl ReplayEstimator {
    pub fn new(mask: ComplexMask) -> Self {
        Self { mask, next: 0 }
    }
}

impl MaskEstimator for ReplayEstimator {
    fn info(&self) -> EstimatorInfo {
        EstimatorInfo {
            name: "replay".into(),
            latency_frames: 0,
            channels: 2,
            complex_output: true,
        }
    }

    fn estimate_frame(&mut self, _: &[Complex32], _: &[Complex32], mask: &mut [Complex32]) -> Result<()> {
        if self.next >= self.mask.frames() {
            return Err(Error::Dimension(format!("recorded mask has only {} frames", self.mask.frames())));
        }
        mask.copy_from_slice(self.mask.frame(self.next));
        self.next += 1;
        Ok(())
    }

    fn reset(&mut self) {
        self.next = 0;
    }
}
