//! Numeric abstraction shared by metrics, scores and the baseline model.
//!
//! Counting metrics only need field arithmetic, so they work over exact
//! rationals as well as floats. Anything that needs `exp`/`sqrt` (logistic
//! scoring, standard deviations) is bounded on [`num_traits::Float`] instead.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::Num;

/// Exact rational used to check metric formulas without rounding.
pub type Rational = Ratio<i64>;

/// A number that metrics can be computed in.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// Lift a confusion count into the scalar type.
    fn from_count(n: u64) -> Self;

    /// Lossy conversion used for rendering.
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for Rational {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count exceeds i64"))
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// Float scalars: everything the logistic baseline and aggregation need.
pub trait Real: Scalar + num_traits::Float {
    fn from_f64(x: f64) -> Self;
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
}
