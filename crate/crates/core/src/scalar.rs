//! Floating-point scalar abstraction shared by the language models and metrics.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

/// A real scalar usable for probabilities and metric values: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn of(value: f64) -> Self {
        <Self as NumCast>::from(value).expect("finite f64 fits every Scalar")
    }

    /// Exact-when-representable conversion from a count.
    fn of_count(count: usize) -> Self {
        <Self as NumCast>::from(count).expect("count fits every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }

    /// Zero-division-safe ratio: `0` when the denominator is zero.
    fn ratio(numerator: usize, denominator: usize) -> Self {
        if denominator == 0 {
            Self::zero()
        } else {
            Self::of_count(numerator) / Self::of_count(denominator)
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable `ln(sum(exp(x)))`.
pub fn log_sum_exp<F: Scalar>(values: &[F]) -> F {
    let max = values.iter().copied().fold(F::neg_infinity(), F::max);
    if !max.is_finite() {
        return max;
    }
    let sum: F = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_handles_zero_denominator() {
        assert_eq!(f64::ratio(3, 0), 0.0);
        assert_eq!(f32::ratio(1, 4), 0.25);
    }

    #[test]
    fn log_sum_exp_matches_naive() {
        let xs = [-1.0f64, -2.5, 0.3];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-12);
        let big = [-1000.0f64, -1000.0];
        assert!((log_sum_exp(&big) - (-1000.0 + 2f64.ln())).abs() < 1e-9);
    }
}
