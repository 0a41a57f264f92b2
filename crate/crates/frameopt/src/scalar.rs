//! Scalar abstraction for the numeric core.
//!
//! All the heavy math (polynomial algebra, element matrices, moment
//! relaxations, the interior-point solver) is generic over [`Scalar`], so the
//! whole pipeline can be instantiated at `f32` or `f64`. The crate root
//! exports `f64` aliases, which is what the CLI and the shipped problem files
//! use.

use nalgebra::RealField;
use num_traits::FromPrimitive;

/// Floating-point scalar usable across the crate: `f32` or `f64`.
pub trait Scalar: RealField + Copy + FromPrimitive + Default {
    /// Lossy conversion from `f64`, for literals and tolerances.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 literal must convert")
    }

    /// Lossy conversion to `f64`, for reporting and serialization.
    fn to_f64(self) -> f64;

    /// Largest finite value of the type.
    fn huge() -> Self;

    /// Relative eigenvalue tolerance for positive-semidefiniteness checks,
    /// scaled to the type's precision.
    fn psd_tol() -> Self;
}

impl Scalar for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }

    fn huge() -> Self {
        f32::MAX
    }

    fn psd_tol() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }

    fn huge() -> Self {
        f64::MAX
    }

    fn psd_tol() -> Self {
        1e-10
    }
}
