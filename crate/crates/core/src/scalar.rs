//! Numeric abstraction for similarity scores.
//!
//! Set-overlap kernels are ratios of integers, so they evaluate exactly in
//! rational arithmetic and approximately in floating point. [`Scalar`] covers
//! both; [`Real`] narrows to floats for the embedding math, which needs a
//! square root.

use num_traits::{Float, FromPrimitive, Num};

/// Scalar usable for set-overlap scores: `f32`, `f64`, or an exact rational.
pub trait Scalar: Num + FromPrimitive + PartialOrd + Clone {}

impl<T> Scalar for T where T: Num + FromPrimitive + PartialOrd + Clone {}

/// Floating-point scalar for embedding vectors and combined retrieval scores.
pub trait Real: Scalar + Float {}

impl<T> Real for T where T: Scalar + Float {}
