//! Power-law tail fit: survival `Pr(X > x) = (x / xmin)^(-α)` for `x >= xmin`.

use super::{require_finite, require_len, FitError};
use crate::trace_model::{DistributionParams, FitFlag, FittedDistribution};

/// Upper end of the heavy-tail exponent range; fits above it are flagged.
pub const HEAVY_TAIL_MAX_EXPONENT: f64 = 2.0;

const MIN_TAIL: usize = 10;
/// Threshold candidates scored in the coarse pass before local refinement.
const COARSE_CANDIDATES: usize = 512;

pub fn pareto_survival(x: f64, exponent: f64, xmin: f64) -> f64 {
    if x <= xmin {
        1.0
    } else {
        (x / xmin).powf(-exponent)
    }
}

pub fn pareto_cdf(x: f64, exponent: f64, xmin: f64) -> f64 {
    1.0 - pareto_survival(x, exponent, xmin)
}

struct Candidate {
    /// Index of xmin in the ascending sample.
    at: usize,
    /// First index of the strict tail (samples > xmin).
    tail_start: usize,
}

struct TailScore {
    alpha: f64,
    ks: f64,
}

/// Hill exponent and KS distance for the samples strictly above `xmin`.
fn score(logs: &[f64], suffix_log: &[f64], c: &Candidate) -> Option<TailScore> {
    let k = logs.len() - c.tail_start;
    if k < 2 {
        return None;
    }
    let ln_xmin = logs[c.at];
    let excess = suffix_log[c.tail_start] - k as f64 * ln_xmin;
    if !(excess > 0.0) {
        return None;
    }
    let alpha = k as f64 / excess;
    let kf = k as f64;
    let mut d = 0.0f64;
    for (i, &l) in logs[c.tail_start..].iter().enumerate() {
        let f = -(-alpha * (l - ln_xmin)).exp_m1();
        d = d.max(((i + 1) as f64 / kf - f).abs()).max((i as f64 / kf - f).abs());
    }
    Some(TailScore { alpha, ks: d })
}

/// Pareto tail fit with a KS-selected threshold.
///
/// Every distinct value in the upper half of the sample is a threshold
/// candidate. For each, the Hill estimator `α = k / Σ ln(x_i / xmin)` is
/// taken over the `k` samples strictly above it, and the threshold whose
/// fitted tail has the smallest KS distance to the tail's empirical
/// distribution wins. Large samples are scored on an evenly spaced subset
/// of candidates first, then exhaustively around the best one.
pub fn fit_pareto_tail(samples: &[f64]) -> Result<FittedDistribution, FitError> {
    require_len(samples, 50)?;
    require_finite(samples)?;
    if let Some(i) = samples.iter().position(|&x| x <= 0.0) {
        return Err(FitError::InvalidArgument(format!("sample {i} is not positive")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let logs: Vec<f64> = sorted.iter().map(|x| x.ln()).collect();
    let mut suffix_log = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix_log[i] = suffix_log[i + 1] + logs[i];
    }

    let mut candidates = Vec::new();
    let mut i = n / 2;
    while i < n {
        let mut end = i + 1;
        while end < n && sorted[end] == sorted[i] {
            end += 1;
        }
        candidates.push(Candidate { at: i, tail_start: end });
        i = end;
    }

    let stride = candidates.len().div_ceil(COARSE_CANDIDATES).max(1);
    let best_in = |range: std::ops::Range<usize>, step: usize| -> Option<(usize, TailScore)> {
        let mut best: Option<(usize, TailScore)> = None;
        for idx in range.step_by(step) {
            if let Some(s) = score(&logs, &suffix_log, &candidates[idx]) {
                if best.as_ref().map_or(true, |(_, b)| s.ks < b.ks) {
                    best = Some((idx, s));
                }
            }
        }
        best
    };
    let coarse = best_in(0..candidates.len(), stride);
    let best = match coarse {
        Some((idx, _)) if stride > 1 => {
            let lo = idx.saturating_sub(stride - 1);
            let hi = (idx + stride).min(candidates.len());
            best_in(lo..hi, 1)
        }
        other => other,
    };
    let Some((idx, tail)) = best else {
        return Err(FitError::TooFewTailSamples { needed: MIN_TAIL, got: 0 });
    };
    let chosen = &candidates[idx];
    let k = n - chosen.tail_start;
    if k < MIN_TAIL {
        return Err(FitError::TooFewTailSamples { needed: MIN_TAIL, got: k });
    }

    let mut flags = Vec::new();
    if !(tail.alpha > 0.0 && tail.alpha <= HEAVY_TAIL_MAX_EXPONENT) {
        flags.push(FitFlag::ExponentOutsideHeavyTailRange);
    }
    Ok(FittedDistribution {
        params: DistributionParams::ParetoTail { exponent: tail.alpha, xmin: sorted[chosen.at], tail_count: k as u64 },
        ks_statistic: Some(tail.ks),
        r_squared: None,
        sample_count: n as u64,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exponent(fit: &FittedDistribution) -> f64 {
        match fit.params {
            DistributionParams::ParetoTail { exponent, .. } => exponent,
            _ => unreachable!(),
        }
    }

    /// Deterministic Pareto quantiles at evenly spaced probabilities.
    fn quantile_grid(alpha: f64, xmin: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| xmin * (1.0 - (i as f64 + 0.5) / n as f64).powf(-1.0 / alpha)).collect()
    }

    #[test]
    fn recovers_exponent_from_quantile_grid() {
        let fit = fit_pareto_tail(&quantile_grid(1.5, 1.0, 2000)).unwrap();
        assert!((exponent(&fit) - 1.5).abs() < 0.05, "{fit:?}");
        assert!(fit.flags.is_empty());
    }

    #[test]
    fn flags_thin_tails() {
        let fit = fit_pareto_tail(&quantile_grid(3.0, 1.0, 2000)).unwrap();
        assert!(fit.has_flag(&FitFlag::ExponentOutsideHeavyTailRange));
    }

    #[test]
    fn scale_invariant() {
        let base = quantile_grid(1.2, 2.0, 500);
        let scaled: Vec<f64> = base.iter().map(|x| x * 8.0).collect();
        let a = exponent(&fit_pareto_tail(&base).unwrap());
        let b = exponent(&fit_pareto_tail(&scaled).unwrap());
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn too_few_tail_samples() {
        // upper half is a single repeated value: nothing lies above any candidate
        let mut s: Vec<f64> = (1..=25).map(|i| i as f64).collect();
        s.extend(std::iter::repeat(100.0).take(25));
        assert!(matches!(fit_pareto_tail(&s), Err(FitError::TooFewTailSamples { .. })));
    }

    #[test]
    fn input_validation() {
        assert!(matches!(fit_pareto_tail(&[1.0; 20]), Err(FitError::TooFewSamples { .. })));
        let mut s = quantile_grid(1.5, 1.0, 60);
        s[0] = 0.0;
        assert!(fit_pareto_tail(&s).is_err());
    }

    #[test]
    fn survival_and_cdf() {
        assert_eq!(pareto_survival(0.5, 1.5, 1.0), 1.0);
        assert!((pareto_survival(4.0, 0.5, 1.0) - 0.5).abs() < 1e-15);
        assert!((pareto_cdf(4.0, 0.5, 1.0) - 0.5).abs() < 1e-15);
    }
}
