//! Eigenvalue shrinkage: the proximal step of the nuclear norm on symmetric
//! matrices.

use nalgebra::DMatrix;

use crate::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Every eigenvalue keeps its sign and loses `tau` of its magnitude, floored
/// at zero. Returns the result and the number of surviving eigenpairs.
pub(crate) fn shrink<T: Scalar>(m: &DMatrix<T>, tau: T) -> Result<(DMatrix<T>, usize)> {
    let n = m.nrows();
    let half = T::lit(0.5);
    let eig = symmetric_eigen(&((m + m.transpose()) * half))?;
    let kept: Vec<(usize, T)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter_map(|(k, &lam)| {
            let mag = lam.abs() - tau;
            (mag > T::zero()).then(|| (k, if lam > T::zero() { mag } else { -mag }))
        })
        .collect();
    if kept.is_empty() {
        return Ok((DMatrix::zeros(n, n), 0));
    }
    let basis = DMatrix::<T>::from_fn(n, kept.len(), |i, c| eig.eigenvectors[(i, kept[c].0)]);
    let scaled = DMatrix::<T>::from_fn(n, kept.len(), |i, c| basis[(i, c)] * kept[c].1);
    let out = &scaled * basis.transpose();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(
            "non-finite value in thresholded matrix".into(),
        ));
    }
    Ok(((&out + out.transpose()) * half, kept.len()))
}
