//! Floating point abstraction used by the numerical parts of the crate.

use std::fmt::{Debug, Display};

use nalgebra::{DMatrix, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

use crate::eigen::SymmetricEigen;
use crate::error::Result;

/// Real scalar type the solver, clustering and bound evaluators are generic over.
///
/// Implemented for `f32` and `f64`. Arithmetic and elementary functions come
/// from [`RealField`]; conversions go through `num-traits`.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Send + Sync + 'static
{
    /// Converts a literal. Panics only for values the type cannot represent at all.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the underlying type.
    fn machine_epsilon() -> Self;

    /// Dense eigendecomposition of the lower triangle of a square matrix.
    /// Use [`crate::eigen::symmetric_eigen`], which checks the shape.
    fn symmetric_eigen_lower(m: &DMatrix<Self>) -> Result<SymmetricEigen<Self>>;
}

impl Scalar for f32 {
    fn machine_epsilon() -> Self {
        f32::EPSILON
    }

    fn symmetric_eigen_lower(m: &DMatrix<Self>) -> Result<SymmetricEigen<Self>> {
        crate::eigen::eigen_f32(m)
    }
}

impl Scalar for f64 {
    fn machine_epsilon() -> Self {
        f64::EPSILON
    }

    fn symmetric_eigen_lower(m: &DMatrix<Self>) -> Result<SymmetricEigen<Self>> {
        crate::eigen::eigen_f64(m)
    }
}
