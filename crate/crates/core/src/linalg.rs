//! Small dense linear-algebra helpers shared by the relevance and spectral stages.

use faer::{Mat, Side};

use crate::{Error, Result};

/// Eigendecomposition of a symmetric matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors as columns. Only the lower triangle is read.
pub(crate) fn symmetric_eigen(matrix: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let eig = matrix
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let n = matrix.nrows();
    let values = (0..n).map(|i| eig.S()[i]).collect();
    Ok((values, eig.U().to_owned()))
}

/// Entries equal in exact arithmetic can differ by far more than machine
/// precision after an eigensolve with small gaps, so ties are judged loosely.
pub const SIGN_TIE_TOLERANCE: f64 = 1e-9;

/// Flips `v` so that its largest-magnitude component is positive.
///
/// Components within a relative [`SIGN_TIE_TOLERANCE`] of the maximum count
/// as tied; the lowest index among them decides.
pub fn canonicalize_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - SIGN_TIE_TOLERANCE))
        .expect("max is attained");
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
