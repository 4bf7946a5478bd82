use super::{require_finite, require_len, FitError};
use crate::trace_model::{DistributionParams, FitFlag, FittedDistribution};

/// Zipf-like rank fit `value(i) ∝ i^(-θ)`.
///
/// Values are ranked in descending order (rank 1 = largest) and `θ` is the
/// negated slope of the least-squares line through `(ln rank, ln value)`.
/// The fit's R² is reported as its goodness. Constant input yields `θ = 0`,
/// `R² = 0` and [`FitFlag::DegenerateInput`].
pub fn fit_zipf(values: &[f64]) -> Result<FittedDistribution, FitError> {
    require_len(values, 10)?;
    require_finite(values)?;
    if let Some(i) = values.iter().position(|&v| v <= 0.0) {
        return Err(FitError::InvalidArgument(format!("value {i} is not positive")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));

    let n = sorted.len() as f64;
    let xs: Vec<f64> = (1..=sorted.len()).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = sorted.iter().map(|v| v.ln()).collect();
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }

    let support_size = values.len() as u64;
    if syy == 0.0 {
        return Ok(FittedDistribution {
            params: DistributionParams::Zipf { exponent: 0.0, support_size },
            ks_statistic: None,
            r_squared: Some(0.0),
            sample_count: support_size,
            flags: vec![FitFlag::DegenerateInput],
        });
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = (1.0 - ss_res / syy).clamp(0.0, 1.0);
    Ok(FittedDistribution {
        params: DistributionParams::Zipf { exponent: -slope, support_size },
        ks_statistic: None,
        r_squared: Some(r_squared),
        sample_count: support_size,
        flags: Vec::new(),
    })
}
