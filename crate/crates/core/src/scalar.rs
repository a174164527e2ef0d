use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{FromPrimitive, NumAssign, Signed, ToPrimitive};

/// Numeric type the solver stack is generic over.
///
/// Floating-point types carry absolute tolerances; exact types (rationals)
/// compare with zero slack, which makes them usable as an independent
/// reference route on small models.
pub trait Scalar:
    NumAssign
    + Signed
    + Copy
    + PartialOrd
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Whether arithmetic is exact (no rounding).
    const EXACT: bool;

    /// Converts a nominal tolerance to this type. Exact types return zero.
    fn tol(nominal: f64) -> Self {
        if Self::EXACT {
            Self::zero()
        } else {
            Self::from_f64(nominal).unwrap_or_else(Self::zero)
        }
    }

    /// Lossy conversion used for reporting and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::zero)
    }

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize fits scalar")
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
}

impl Scalar for f32 {
    const EXACT: bool = false;

    // f32 cannot resolve the default 1e-9 slack.
    fn tol(nominal: f64) -> Self {
        (nominal as f32).max(1e-5)
    }
}

impl Scalar for Ratio<i128> {
    const EXACT: bool = true;
}
