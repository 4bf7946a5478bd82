use super::FitError;

/// One-sample Kolmogorov-Smirnov distance between `samples` and `cdf`:
/// `max_i max(|i/n - F(x_i)|, |(i-1)/n - F(x_i)|)` over sorted samples.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64, FitError> {
    if samples.is_empty() {
        return Err(FitError::InvalidArgument("KS statistic of an empty sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    ks_sorted(&sorted, cdf)
}

pub(crate) fn ks_sorted<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> Result<f64, FitError> {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(FitError::CdfOutOfRange { x, value: f });
        }
        let hi = (i + 1) as f64 / n;
        let lo = i as f64 / n;
        d = d.max((hi - f).abs()).max((lo - f).abs());
    }
    Ok(d)
}
