//! Scalar abstraction for all simulated quantities.
//!
//! Times (seconds), bandwidths (bytes/second) and data volumes (bytes) are
//! real-valued throughout the model; byte quantities are deliberately not
//! rounded to integers mid-pipeline, so chunk counts need not divide
//! dimension sizes. Everything is generic over [`Scalar`] so the whole engine
//! runs at `f32` or `f64`; the crate root exports `f64` aliases.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable for simulated time, bandwidth and volume.
pub trait Scalar:
    Float + FromPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from an integer count (dimension sizes,
    /// step counts, chunk counts are all far below 2^24).
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable in scalar type")
    }

    /// Conversion from an `f64` constant (config values, unit factors).
    fn from_config(v: f64) -> Self {
        Self::from_f64(v).expect("config value not representable in scalar type")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + Default + Debug + Display + Send + Sync + 'static
{
}

/// Total order on scalars produced by the simulation.
///
/// Valid inputs never produce NaN; hitting one means the model state is
/// corrupt, so panicking beats silently misordering events.
pub fn cmp_scalar<S: Scalar>(a: S, b: S) -> Ordering {
    a.partial_cmp(&b)
        .expect("NaN encountered while ordering simulation quantities")
}

/// `max` under [`cmp_scalar`].
pub fn max_scalar<S: Scalar>(a: S, b: S) -> S {
    match cmp_scalar(a, b) {
        Ordering::Less => b,
        _ => a,
    }
}

/// Strictly positive and finite; false for zero, negatives, infinities and
/// NaN alike, so it doubles as an input guard.
pub fn is_positive_finite<S: Scalar>(v: S) -> bool {
    v.is_finite() && v > S::zero()
}
