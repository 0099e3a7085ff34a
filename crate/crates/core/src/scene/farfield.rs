use std::f64::consts::PI;

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::dsp::MultichannelAudio;
use crate::geometry::ArrayGeometry;

/// Delays `signal` by a (possibly fractional) number of samples with a
/// linear phase ramp over the whole signal. The delay is circular.
pub fn fractional_delay(signal: &[f32], delay_samples: f64) -> Vec<f32> {
    let n = signal.len();
    if n == 0 || delay_samples == 0.0 {
        return signal.to_vec();
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&s| Complex::new(s as f64, 0.0)).collect();
    fwd.process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        // Signed frequency index keeps the output real.
        let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let phase = -2.0 * PI * kk * delay_samples / n as f64;
        if n % 2 == 0 && k == n / 2 {
            *z *= phase.cos();
        } else {
            *z *= Complex::from_polar(1.0, phase);
        }
    }
    inv.process(&mut buf);
    buf.iter().map(|z| (z.re / n as f64) as f32).collect()
}

/// Plane wave from `theta_deg`: channel 1 (second mic) carries the source
/// signal, channel 0 (reference) the same signal delayed by
/// `d cos(theta) / c`.
pub fn simulate_far_field(signal: &[f32], theta_deg: f64, geom: &ArrayGeometry, sample_rate: u32) -> MultichannelAudio {
    let delay = geom.reference_delay_s(theta_deg) * sample_rate as f64;
    let reference = if theta_deg.rem_euclid(180.0) == 90.0 {
        signal.to_vec()
    } else {
        fractional_delay(signal, delay)
    };
    MultichannelAudio::new(vec![reference, signal.to_vec()], sample_rate).expect("equal lengths")
}
