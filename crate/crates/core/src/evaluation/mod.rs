//! Metrics and experiment harnesses: power reduction, SI-SDR, PR heatmaps,
//! delta-PR steering sweeps and real-time factor.

mod heatmap;
mod metrics;
mod rtf;

pub use heatmap::{
    delta_pr, gamma_range, pr_heatmap, steering_sweep, with_thread_limit, BoundaryOverlay, HeatmapCell, HeatmapConfig,
    HeatmapGrid, SweepPoint, THREADS_ENV,
};
pub use metrics::{
    power_reduction, score_separation, si_sdr, Aggregate, MetricsReport, Sample, ScenarioScores, PR_CAP_DB, SI_SDR_CAP_DB,
};
pub use rtf::{measure_rtf, noise_clip, ClipProcessor, RtfReport};
