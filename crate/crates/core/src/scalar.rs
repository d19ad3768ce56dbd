//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point element type (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossless for `f64`, rounding for `f32`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Iteration floor for Jacobi sweeps and similar fixed-point loops: `1e-12`,
    /// raised to a few ulps for low-precision types.
    fn iteration_tol() -> Self {
        Self::of(1e-12).max(Self::epsilon() * Self::of(4.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
