use super::{require_finite, FitError};

/// Number of quantile points in exported CDF curves.
pub const OVERLAY_POINTS: usize = 512;

/// Empirical distribution function `F(x) = #{samples <= x} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

pub fn ecdf(samples: &[f64]) -> Result<Ecdf, FitError> {
    if samples.is_empty() {
        return Err(FitError::InvalidArgument("ECDF of an empty sample".into()));
    }
    require_finite(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Ecdf { sorted })
}

impl Ecdf {
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Right-continuous step function; exactly 1 at and above the maximum.
    pub fn evaluate(&self, x: f64) -> f64 {
        let at_or_below = self.sorted.partition_point(|&v| v <= x);
        at_or_below as f64 / self.sorted.len() as f64
    }

    /// Smallest sample `x` with `F(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let rank = (p.clamp(0.0, 1.0) * n as f64).ceil() as usize;
        self.sorted[rank.clamp(1, n) - 1]
    }

    /// `(x, F(x))` at evenly spaced probabilities `(i + 0.5) / points`.
    pub fn curve(&self, points: usize) -> Vec<(f64, f64)> {
        (0..points)
            .map(|i| {
                let x = self.quantile((i as f64 + 0.5) / points as f64);
                (x, self.evaluate(x))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_values() {
        let e = ecdf(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(e.evaluate(2.0), 2.0 / 3.0);
        assert_eq!(e.evaluate(0.5), 0.0);
        assert_eq!(e.evaluate(3.0), 1.0);
        assert_eq!(e.evaluate(1e9), 1.0);
        assert_eq!(e.quantile(0.5), 2.0);
        assert_eq!(e.quantile(0.0), 1.0);
        assert_eq!(e.quantile(1.0), 3.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ecdf(&[]).is_err());
        assert!(ecdf(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn curve_is_monotone() {
        let e = ecdf(&[5.0, 1.0, 1.0, 2.0, 9.0, 3.0]).unwrap();
        let c = e.curve(OVERLAY_POINTS);
        assert_eq!(c.len(), OVERLAY_POINTS);
        assert!(c.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    }
}
