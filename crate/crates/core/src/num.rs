//! Scalar abstraction for the numeric kernels.
//!
//! Geometry, sequence models and threshold detectors are written against
//! [`Real`] so they can run in `f32` or `f64`. The simulator itself is
//! concrete `f64`; see the aliases at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by every generic kernel in this crate.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite constant")
    }

    /// Widening conversion to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}
