//! Deterministic numeric plumbing: a seeded PRNG, dense row-major
//! matrices with the handful of products the network needs, and a
//! central-difference gradient checker.
//!
//! Training math runs in `f32`. Everything here is also instantiated at
//! `f64` because finite-difference gradient tests are too noisy in
//! single precision; the [`Real`] trait is the pivot between the two.

mod gradcheck;
mod matrix;
mod rng;

pub use gradcheck::check_gradient;
pub use matrix::DenseMatrix;
pub use rng::Pcg32;

use num_traits::Float;

/// Scalar type of the numeric pipeline: `f32` for training, `f64` for
/// gradient verification.
pub trait Real: Float + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for converting an `f64` constant into the active scalar type.
#[inline]
pub fn real<T: Real>(v: f64) -> T {
    T::from(v).expect("f64 constant must convert into the scalar type")
}

/// Widens any scalar back to `f64`, e.g. for reporting and metrics.
#[inline]
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().expect("scalar must widen to f64")
}
