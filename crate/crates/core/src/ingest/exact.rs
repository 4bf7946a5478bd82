//! Exact accumulation of duration-weighted sums.
//!
//! Per-job resource means must not depend on the order in which usage rows
//! arrive (files may be read in any order, or in parallel). Floating-point
//! addition is not associative, so the weighted sum is kept as an exact
//! binary fraction and rounded to `f64` only once, at the end.

use num_bigint::BigUint;

/// Non-negative exact sum of `weight * value` terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExactSum {
    // value = mantissa * 2^exponent
    mantissa: BigUint,
    exponent: i32,
}

/// Splits a finite non-negative double into `(m, e)` with `x = m * 2^e`.
fn decompose(x: f64) -> (u64, i32) {
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let fraction = bits & ((1u64 << 52) - 1);
    if biased == 0 {
        (fraction, -1074)
    } else {
        (fraction | (1u64 << 52), biased - 1075)
    }
}

impl ExactSum {
    pub fn is_zero(&self) -> bool {
        self.mantissa.bits() == 0
    }

    /// Adds `weight * value`. `value` must be finite and non-negative.
    pub fn add(&mut self, weight: u64, value: f64) {
        debug_assert!(value.is_finite() && value >= 0.0);
        if weight == 0 || value == 0.0 {
            return;
        }
        let (m, e) = decompose(value);
        let term = BigUint::from(m) * BigUint::from(weight);
        self.add_scaled(term, e);
    }

    fn add_scaled(&mut self, term: BigUint, e: i32) {
        if self.is_zero() {
            self.mantissa = term;
            self.exponent = e;
        } else if e < self.exponent {
            let shift = (self.exponent - e) as usize;
            self.mantissa <<= shift;
            self.mantissa += term;
            self.exponent = e;
        } else {
            self.mantissa += term << ((e - self.exponent) as usize);
        }
    }

    pub fn merge(&mut self, other: &ExactSum) {
        if !other.is_zero() {
            self.add_scaled(other.mantissa.clone(), other.exponent);
        }
    }

    /// `self / divisor`, correctly rounded to nearest (ties to even).
    pub fn div_to_f64(&self, divisor: u128) -> f64 {
        assert!(divisor > 0, "division by zero weight");
        if self.is_zero() {
            return 0.0;
        }
        let divisor = BigUint::from(divisor);
        // Scale so the integer quotient carries at least 66 significant bits.
        let shift = (66 + divisor.bits() as i64 - self.mantissa.bits() as i64).max(0) as usize;
        let numerator = &self.mantissa << shift;
        let quotient = &numerator / &divisor;
        let inexact = &quotient * &divisor != numerator;

        let qbits = quotient.bits() as usize;
        let drop = qbits - 53;
        let top = &quotient >> drop;
        let mut significand = top.iter_u64_digits().next().unwrap_or(0);
        let rest = &quotient - (&top << drop);
        let half = BigUint::from(1u8) << (drop - 1);
        let round_up = rest > half || (rest == half && (inexact || significand & 1 == 1));
        let mut exp = self.exponent as i64 - shift as i64 + drop as i64;
        if round_up {
            significand += 1;
            if significand == 1u64 << 53 {
                significand >>= 1;
                exp += 1;
            }
        }
        scale_pow2(significand as f64, exp)
    }
}

/// `x * 2^exp` without intermediate overflow for the ranges used here.
fn scale_pow2(mut x: f64, mut exp: i64) -> f64 {
    while exp > 1000 {
        x *= 2f64.powi(1000);
        exp -= 1000;
    }
    while exp < -1000 {
        x *= 2f64.powi(-1000);
        exp += 1000;
    }
    x * 2f64.powi(exp as i32)
}

/// Duration-weighted mean with exact, order-independent accumulation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WeightedMean {
    sum: ExactSum,
    weight: u128,
}

impl WeightedMean {
    pub fn add(&mut self, weight: u64, value: f64) {
        self.sum.add(weight, value);
        self.weight += weight as u128;
    }

    pub fn merge(&mut self, other: &WeightedMean) {
        self.sum.merge(&other.sum);
        self.weight += other.weight;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.weight > 0).then(|| self.sum.div_to_f64(self.weight))
    }
}
