//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the solvers are generic over: `f32` or `f64`.
///
/// `Display`/`FromStr` are required so frontiers can be written to CSV and
/// read back without loss (Rust prints the shortest round-tripping decimal).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + FromStr + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant. Panics only for values the type cannot
    /// represent at all, which never happens for the literals used here.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Default stationarity tolerance: `1e-8`, loosened to a few hundred ulps
    /// for types where that is below working precision.
    #[inline]
    fn default_tolerance() -> Self {
        Self::lit(1e-8).max(Self::epsilon() * Self::lit(64.0))
    }

    /// Largest argument accepted by `exp` before the result overflows.
    #[inline]
    fn max_exp_arg() -> Self {
        Self::max_value().ln()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Euclidean norm.
pub fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `ln Σ wᵢ exp(aᵢ)` with max subtraction. Entries with zero weight are skipped.
pub fn log_sum_exp<T: Scalar>(args: &[T], weights: &[T]) -> T {
    let shift = args
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > T::zero())
        .map(|(&a, _)| a)
        .fold(T::neg_infinity(), T::max);
    if !shift.is_finite() {
        return shift;
    }
    let s: T = args
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > T::zero())
        .map(|(&a, &w)| w * (a - shift).exp())
        .sum();
    shift + s.ln()
}
