//! Small dense linear-algebra helpers (dimensions here are tiny, d <= ~20).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Cholesky factorization A = L L^T for a symmetric positive-definite matrix.
/// Returns `None` when a non-positive pivot is encountered.
pub(crate) fn cholesky(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solve L x = b for lower-triangular L.
pub(crate) fn forward_substitute(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[[i, k]] * x[k];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}

/// log det(A) from its Cholesky factor.
pub(crate) fn log_det_from_chol(l: ArrayView2<f64>) -> f64 {
    (0..l.nrows()).map(|i| l[[i, i]].ln()).sum::<f64>() * 2.0
}

/// Squared Mahalanobis distance (x - mu)^T A^{-1} (x - mu) given L = chol(A).
pub(crate) fn mahalanobis_sq(l: ArrayView2<f64>, diff: ArrayView1<f64>) -> f64 {
    let z = forward_substitute(l, diff);
    z.dot(&z)
}
