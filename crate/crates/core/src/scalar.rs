//! Scalar abstraction for the numeric core.
//!
//! Every kernel is written against [`Scalar`] so the engine instantiates at
//! f32 or f64; the crate-root aliases pin f64 for all shipped paths, which is
//! what the gradient tolerances are calibrated for.

use std::fmt;

/// Floating scalar the tensor engine operates on.
pub trait Scalar:
    num_traits::Float + fmt::Debug + fmt::Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from f64, for literals and config values.
    fn from_f64(v: f64) -> Self {
        num_traits::NumCast::from(v).expect("finite f64 literal converts")
    }

    /// Lossy conversion to f64, for reporting and serialization.
    fn to_f64(self) -> f64 {
        num_traits::NumCast::from(self).expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
