//! Two-parameter Weibull distribution with shape `α` and scale `β`:
//!
//! ```text
//! f(x) = (α/β) (x/β)^(α-1) exp(-(x/β)^α)     x >= 0
//! F(x) = 1 - exp(-(x/β)^α)
//! ```

use super::ks::ks_sorted;
use super::{require_finite, require_len, FitError};
use crate::trace_model::{DistributionParams, FitFlag, FittedDistribution};

const SHAPE_BRACKET: (f64, f64) = (1e-3, 1e3);
const PROFILE_TOL: f64 = 1e-9;
const MAX_NEWTON_STEPS: usize = 500;

fn check_params(shape: f64, scale: f64) -> Result<(), FitError> {
    if !(shape > 0.0 && shape.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
        return Err(FitError::InvalidArgument(format!(
            "Weibull parameters must be positive and finite (shape = {shape}, scale = {scale})"
        )));
    }
    Ok(())
}

fn check_x(x: f64) -> Result<(), FitError> {
    if !(x >= 0.0) {
        return Err(FitError::InvalidArgument(format!("Weibull support is x >= 0, got {x}")));
    }
    Ok(())
}

/// Density. At `x = 0` with `shape < 1` the density diverges and
/// `f64::INFINITY` is returned.
pub fn weibull_pdf(x: f64, shape: f64, scale: f64) -> Result<f64, FitError> {
    check_params(shape, scale)?;
    check_x(x)?;
    if x == 0.0 {
        return Ok(if shape < 1.0 {
            f64::INFINITY
        } else if shape == 1.0 {
            1.0 / scale
        } else {
            0.0
        });
    }
    let z = x / scale;
    Ok(shape / scale * z.powf(shape - 1.0) * (-z.powf(shape)).exp())
}

pub fn weibull_cdf(x: f64, shape: f64, scale: f64) -> Result<f64, FitError> {
    check_params(shape, scale)?;
    check_x(x)?;
    Ok(-(-(x / scale).powf(shape)).exp_m1())
}

/// Inverse CDF: `β (-ln(1 - p))^(1/α)` for `p` in `[0, 1)`.
pub fn weibull_quantile(p: f64, shape: f64, scale: f64) -> Result<f64, FitError> {
    check_params(shape, scale)?;
    if !(0.0..1.0).contains(&p) {
        return Err(FitError::InvalidArgument(format!("probability {p} outside [0, 1)")));
    }
    Ok(scale * (-(-p).ln_1p()).powf(1.0 / shape))
}

/// Log-likelihood of `samples` (all > 0).
pub fn weibull_log_likelihood(samples: &[f64], shape: f64, scale: f64) -> f64 {
    let n = samples.len() as f64;
    let mut sum_ln = 0.0;
    let mut sum_pow = 0.0;
    for &x in samples {
        let z = x / scale;
        sum_ln += x.ln();
        sum_pow += z.powf(shape);
    }
    n * shape.ln() - n * shape * scale.ln() + (shape - 1.0) * sum_ln - sum_pow
}

/// Analytic gradient `(∂ℓ/∂shape, ∂ℓ/∂scale)` of the log-likelihood.
pub fn weibull_score(samples: &[f64], shape: f64, scale: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let mut sum_ln = 0.0;
    let mut sum_pow = 0.0;
    let mut sum_pow_ln = 0.0;
    for &x in samples {
        let ln_z = (x / scale).ln();
        let p = (shape * ln_z).exp();
        sum_ln += ln_z;
        sum_pow += p;
        sum_pow_ln += p * ln_z;
    }
    let d_shape = n / shape + sum_ln - sum_pow_ln;
    let d_scale = shape / scale * (sum_pow - n);
    (d_shape, d_scale)
}

/// Sums needed by the shape profile equation, on log-samples scaled so the
/// largest is 0 (the equation is scale-free).
struct Profile<'a> {
    log_y: &'a [f64],
    mean_log_y: f64,
}

impl Profile<'_> {
    /// `(g(α), g'(α), Σ y^α)` with
    /// `g(α) = Σ y^α ln y / Σ y^α - 1/α - mean(ln y)`.
    fn eval(&self, alpha: f64) -> (f64, f64, f64) {
        let (mut b, mut a, mut c) = (0.0, 0.0, 0.0);
        for &l in self.log_y {
            let w = (alpha * l).exp();
            b += w;
            a += w * l;
            c += w * l * l;
        }
        let ratio = a / b;
        let g = ratio - 1.0 / alpha - self.mean_log_y;
        let dg = (c / b - ratio * ratio) + 1.0 / (alpha * alpha);
        (g, dg, b)
    }
}

/// Maximum-likelihood Weibull fit.
///
/// The shape solves the profile score equation by safeguarded Newton
/// iteration on `[1e-3, 1e3]`; the scale follows in closed form as
/// `(Σ x^α / n)^(1/α)`. Zero samples are replaced by the smallest positive
/// normal double and reported with [`FitFlag::ZerosShifted`].
pub fn fit_weibull(samples: &[f64]) -> Result<FittedDistribution, FitError> {
    require_len(samples, 10)?;
    require_finite(samples)?;
    if let Some(i) = samples.iter().position(|&x| x < 0.0) {
        return Err(FitError::InvalidArgument(format!("sample {i} is negative")));
    }
    let mut zeros = 0u64;
    let mut data: Vec<f64> = samples
        .iter()
        .map(|&x| {
            if x == 0.0 {
                zeros += 1;
                f64::MIN_POSITIVE
            } else {
                x
            }
        })
        .collect();
    data.sort_by(f64::total_cmp);

    let n = data.len() as f64;
    let x_max = *data.last().expect("n >= 10");
    let log_y: Vec<f64> = data.iter().map(|&x| (x / x_max).ln()).collect();
    let mean_log_y = log_y.iter().sum::<f64>() / n;
    let profile = Profile { log_y: &log_y, mean_log_y };

    let (mut lo, mut hi) = SHAPE_BRACKET;
    let (g_lo, _, _) = profile.eval(lo);
    let (g_hi, _, _) = profile.eval(hi);
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(FitError::NoBracket(format!(
            "profile residual has no sign change on [{lo}, {hi}] (g = {g_lo:.3e}, {g_hi:.3e}); samples may be constant"
        )));
    }

    let var_log = log_y.iter().map(|l| (l - mean_log_y).powi(2)).sum::<f64>() / n;
    let guess = std::f64::consts::PI / (6.0 * var_log).sqrt();
    let mut alpha = if guess.is_finite() && guess > lo && guess < hi { guess } else { 1.0 };
    let mut sum_pow = f64::NAN;
    for _ in 0..MAX_NEWTON_STEPS {
        let (g, dg, b) = profile.eval(alpha);
        sum_pow = b;
        if g.abs() <= PROFILE_TOL {
            break;
        }
        if g < 0.0 {
            lo = alpha;
        } else {
            hi = alpha;
        }
        let step = alpha - g / dg;
        alpha = if step > lo && step < hi && dg > 0.0 { step } else { (lo * hi).sqrt() };
        if hi - lo <= 1e-15 * alpha {
            sum_pow = profile.eval(alpha).2;
            break;
        }
    }
    let scale = x_max * (sum_pow / n).powf(1.0 / alpha);

    let ks = ks_sorted(&data, |x| -(-(x / scale).powf(alpha)).exp_m1())?;
    let mut flags = Vec::new();
    if zeros > 0 {
        flags.push(FitFlag::ZerosShifted { count: zeros });
    }
    Ok(FittedDistribution {
        params: DistributionParams::Weibull { shape: alpha, scale },
        ks_statistic: Some(ks),
        r_squared: None,
        sample_count: samples.len() as u64,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_reduction() {
        for &x in &[0.0, 0.3, 1.0, 4.5] {
            let f = weibull_pdf(x, 1.0, 2.0).unwrap();
            assert!((f - 0.5 * (-x / 2.0f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn density_at_zero() {
        assert_eq!(weibull_pdf(0.0, 1.5, 2.0).unwrap(), 0.0);
        assert_eq!(weibull_pdf(0.0, 0.5, 2.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn cdf_at_scale() {
        let v = weibull_cdf(2.0, 1.5, 2.0).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((v - 0.63212).abs() < 1e-5);
        assert_eq!(weibull_cdf(0.0, 1.5, 2.0).unwrap(), 0.0);
        assert_eq!(weibull_cdf(f64::INFINITY, 1.5, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let u = 1.0 - (-1.0f64).exp();
        assert!((weibull_quantile(u, 1.5, 2.0).unwrap() - 2.0).abs() < 1e-12);
        for &p in &[0.01, 0.3, 0.9, 0.999] {
            let x = weibull_quantile(p, 0.7, 3.0).unwrap();
            assert!((weibull_cdf(x, 0.7, 3.0).unwrap() - p).abs() < 1e-12);
        }
    }

    #[test]
    fn argument_errors() {
        assert!(weibull_pdf(-1.0, 1.5, 2.0).is_err());
        assert!(weibull_pdf(1.0, 0.0, 2.0).is_err());
        assert!(weibull_cdf(1.0, 1.5, -2.0).is_err());
        assert!(weibull_quantile(1.0, 1.5, 2.0).is_err());
    }

    #[test]
    fn constant_samples_have_no_bracket() {
        let err = fit_weibull(&[3.0; 20]).unwrap_err();
        assert!(matches!(err, FitError::NoBracket(_)), "{err:?}");
    }

    #[test]
    fn small_or_negative_inputs() {
        assert!(matches!(fit_weibull(&[1.0; 5]), Err(FitError::TooFewSamples { .. })));
        let mut s = vec![1.0; 12];
        s[3] = -1.0;
        assert!(fit_weibull(&s).is_err());
    }

    #[test]
    fn zeros_are_shifted_and_counted() {
        let mut s: Vec<f64> = (1..=30).map(|i| i as f64 * 0.37).collect();
        s[0] = 0.0;
        s[5] = 0.0;
        let fit = fit_weibull(&s).unwrap();
        assert!(fit.has_flag(&FitFlag::ZerosShifted { count: 2 }));
    }
}
