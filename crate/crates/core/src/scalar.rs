//! Scalar abstraction shared by the analytic parts of the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the numeric core is generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts a literal. Every `f64` literal used in this crate is representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Natural log of the gamma function.
    fn ln_gamma(self) -> Self {
        Self::lit(statrs::function::gamma::ln_gamma(self.as_f64()))
    }

    fn erf(self) -> Self {
        Self::lit(statrs::function::erf::erf(self.as_f64()))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `ln C(n, k)` for real `k` in `[0, n]`, via log-gamma.
pub fn ln_binomial<T: Scalar>(n: T, k: T) -> T {
    (n + T::one()).ln_gamma() - (k + T::one()).ln_gamma() - (n - k + T::one()).ln_gamma()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_binomial_matches_integer_coefficients() {
        assert_relative_eq!(ln_binomial(10.0_f64, 3.0).exp(), 120.0, max_relative = 1e-12);
        assert_relative_eq!(ln_binomial(80.0_f64, 40.0).exp(), 1.075_072_087_333_185e23, max_relative = 1e-10);
        assert_relative_eq!(ln_binomial(5.0_f32, 0.0).exp(), 1.0, max_relative = 1e-5);
    }

    #[test]
    fn ln_binomial_is_symmetric_for_real_index() {
        let a = ln_binomial(70.0_f64, 12.3);
        let b = ln_binomial(70.0_f64, 70.0 - 12.3);
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }
}
