use serde::{Deserialize, Serialize};

use super::{require_finite, require_len, FitError};

/// Location and tail quantiles of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSummary {
    pub n: u64,
    pub mean: f64,
    pub median: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
    /// Absent when the median is zero.
    pub mean_to_median: Option<f64>,
}

/// Linearly interpolated quantile of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn tail_skewness_report(samples: &[f64]) -> Result<TailSummary, FitError> {
    require_len(samples, 1)?;
    require_finite(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let median = quantile_sorted(&sorted, 0.5);
    Ok(TailSummary {
        n: sorted.len() as u64,
        mean,
        median,
        p90: quantile_sorted(&sorted, 0.9),
        p99: quantile_sorted(&sorted, 0.99),
        max: *sorted.last().expect("non-empty"),
        mean_to_median: (median != 0.0).then(|| mean / median),
    })
}
