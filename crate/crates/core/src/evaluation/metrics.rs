use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cap for power reduction when the estimate is silent.
pub const PR_CAP_DB: f64 = 100.0;
/// Symmetric cap for SI-SDR.
pub const SI_SDR_CAP_DB: f64 = 100.0;

/// Sample types the metrics accept; accumulation is always in `f64`.
pub trait Sample: Copy + Into<f64> {}
impl Sample for f32 {}
impl Sample for f64 {}

fn energy<T: Sample>(x: &[T]) -> f64 {
    x.iter().map(|&v| v.into().powi(2)).sum()
}

fn same_len<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Metric(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

/// `10 log10(|y_ref|^2 / |t_hat|^2)`; positive means the estimate is
/// quieter than the reference microphone.
pub fn power_reduction<T: Sample>(y_ref: &[T], t_hat: &[T]) -> Result<f64> {
    same_len(y_ref, t_hat)?;
    let num = energy(y_ref);
    if num == 0.0 {
        return Err(Error::Metric("reference signal has zero energy".into()));
    }
    let den = energy(t_hat);
    if den == 0.0 {
        return Ok(PR_CAP_DB);
    }
    Ok((10.0 * (num / den).log10()).min(PR_CAP_DB))
}

/// Scale-invariant signal-to-distortion ratio in dB.
pub fn si_sdr<T: Sample>(estimate: &[T], reference: &[T]) -> Result<f64> {
    same_len(estimate, reference)?;
    let ref_energy = energy(reference);
    if ref_energy == 0.0 {
        return Err(Error::Metric("reference signal has zero energy".into()));
    }
    let dot: f64 = estimate.iter().zip(reference).map(|(&e, &r)| e.into() * r.into()).sum();
    let alpha = dot / ref_energy;
    let (mut target, mut noise) = (0.0, 0.0);
    for (&e, &r) in estimate.iter().zip(reference) {
        let t = alpha * r.into();
        target += t * t;
        noise += (t - e.into()).powi(2);
    }
    if target == 0.0 {
        return Ok(-SI_SDR_CAP_DB);
    }
    if noise == 0.0 {
        return Ok(SI_SDR_CAP_DB);
    }
    Ok((10.0 * (target / noise).log10()).clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB))
}

/// Mean, population standard deviation and count of a set of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Aggregate {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

/// Scores for one processed scenario; improvements are processed minus
/// unprocessed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScores {
    pub pr_db: f64,
    pub si_sdr_db: f64,
    pub si_sdr_improvement_db: f64,
}

/// Scores a separated signal against the target stem at the reference
/// microphone.
pub fn score_separation(mixture_ref: &[f32], estimate: &[f32], target_ref: &[f32]) -> Result<ScenarioScores> {
    let processed = si_sdr(estimate, target_ref)?;
    let unprocessed = si_sdr(mixture_ref, target_ref)?;
    Ok(ScenarioScores {
        pr_db: power_reduction(mixture_ref, estimate)?,
        si_sdr_db: processed,
        si_sdr_improvement_db: processed - unprocessed,
    })
}

/// JSON report; each field aggregates over the scenarios that produced it.
/// Perceptual scores come from external tools and are left empty here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricsReport {
    pub scenario: String,
    pub pr_db: Option<Aggregate>,
    pub delta_pr_db: Option<Aggregate>,
    pub si_sdr_db: Option<Aggregate>,
    pub si_sdr_improvement_db: Option<Aggregate>,
    pub rtf: Option<Aggregate>,
    pub dnsmos_sig: Option<Aggregate>,
    pub dnsmos_bak: Option<Aggregate>,
    pub dnsmos_ovrl: Option<Aggregate>,
}

impl MetricsReport {
    pub fn from_scores(scenario: impl Into<String>, scores: &[ScenarioScores]) -> Self {
        let col = |f: fn(&ScenarioScores) -> f64| Aggregate::from_values(&scores.iter().map(f).collect::<Vec<_>>());
        Self {
            scenario: scenario.into(),
            pr_db: col(|s| s.pr_db),
            si_sdr_db: col(|s| s.si_sdr_db),
            si_sdr_improvement_db: col(|s| s.si_sdr_improvement_db),
            ..Default::default()
        }
    }
}
