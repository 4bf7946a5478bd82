//! Empirical and parametric distributions for arrival, usage and runtime
//! features: ECDF, two-parameter Weibull (MLE), Zipf-like rank regression,
//! Pareto tail (Hill estimator with KS-selected threshold) and the
//! Kolmogorov-Smirnov distance used to score every fit.

mod ecdf;
mod ks;
mod pareto;
mod summary;
mod weibull;
mod zipf;

use thiserror::Error;

pub use ecdf::{ecdf, Ecdf, OVERLAY_POINTS};
pub use ks::ks_statistic;
pub use pareto::{fit_pareto_tail, pareto_cdf, pareto_survival, HEAVY_TAIL_MAX_EXPONENT};
pub use summary::{quantile_sorted, tail_skewness_report, TailSummary};
pub use weibull::{
    fit_weibull, weibull_cdf, weibull_log_likelihood, weibull_pdf, weibull_quantile, weibull_score,
};
pub use zipf::fit_zipf;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not enough samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("no root bracket for the Weibull shape equation: {0}")]
    NoBracket(String),
    #[error("only {got} tail samples above the selected xmin (need {needed})")]
    TooFewTailSamples { needed: usize, got: usize },
    #[error("distribution function returned {value} at x = {x}, outside [0, 1]")]
    CdfOutOfRange { x: f64, value: f64 },
}

fn require_len(samples: &[f64], needed: usize) -> Result<(), FitError> {
    if samples.len() < needed {
        return Err(FitError::TooFewSamples { needed, got: samples.len() });
    }
    Ok(())
}

fn require_finite(samples: &[f64]) -> Result<(), FitError> {
    match samples.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(FitError::InvalidArgument(format!("sample {i} is not finite"))),
        None => Ok(()),
    }
}
