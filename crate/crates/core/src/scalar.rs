//! Scalar abstraction shared by the tensor, model and optimizer code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point element type: `f32` or `f64`.
///
/// Gradient checks at the tolerances used in the test suite need `f64`;
/// `f32` is supported for inference and cheap training runs.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for data values and hyperparameters.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
