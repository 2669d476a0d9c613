//! Dense symmetric eigendecomposition backed by `faer`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigenvalues in ascending order; column `k` of `eigenvectors` belongs to
/// `eigenvalues[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T: Scalar> {
    pub eigenvalues: DVector<T>,
    pub eigenvectors: DMatrix<T>,
}

/// Decomposes a symmetric matrix. Only the lower triangle is read.
pub fn symmetric_eigen<T: Scalar>(m: &DMatrix<T>) -> Result<SymmetricEigen<T>> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    T::symmetric_eigen_lower(m)
}

macro_rules! faer_eigen {
    ($name:ident, $t:ty) => {
        pub(crate) fn $name(m: &DMatrix<$t>) -> Result<SymmetricEigen<$t>> {
            let n = m.nrows();
            let a = faer::Mat::<$t>::from_fn(n, n, |i, j| m[(i, j)]);
            let evd = a
                .self_adjoint_eigen(faer::Side::Lower)
                .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
            let s = evd.S().column_vector();
            let u = evd.U();
            Ok(SymmetricEigen {
                eigenvalues: DVector::from_fn(n, |k, _| s[k]),
                eigenvectors: DMatrix::from_fn(n, n, |i, k| u[(i, k)]),
            })
        }
    };
}

faer_eigen!(eigen_f32, f32);
faer_eigen!(eigen_f64, f64);
