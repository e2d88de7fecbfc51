use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar used throughout the optimization layers.
///
/// The solver tolerances scale with the precision of the type, so an `f32`
/// solve is judged against looser thresholds than an `f64` one.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Primal feasibility tolerance.
    fn feas_tol() -> Self;
    /// Reduced-cost (dual feasibility) tolerance.
    fn opt_tol() -> Self;
    /// Smallest acceptable pivot magnitude.
    fn pivot_tol() -> Self;

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("representable constant")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn feas_tol() -> Self {
        1e-7
    }
    fn opt_tol() -> Self {
        1e-7
    }
    fn pivot_tol() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn feas_tol() -> Self {
        1e-4
    }
    fn opt_tol() -> Self {
        1e-4
    }
    fn pivot_tol() -> Self {
        1e-5
    }
}
