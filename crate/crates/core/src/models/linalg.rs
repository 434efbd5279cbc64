//! Small dense linear algebra for the state-space models: Cholesky and
//! triangular solves on row-major buffers, sized for single-digit dimensions
//! so the hot paths stay allocation free.

use crate::scalar::Scalar;

/// In-place lower Cholesky of a symmetric positive semidefinite matrix
/// (row-major, only the lower triangle is read or written). Returns false on
/// a negative pivot. Zero pivots are allowed and produce a zero column, so
/// degenerate covariances such as the zero matrix factor cleanly.
pub(crate) fn cholesky_in_place<T: Scalar>(a: &mut [T], n: usize) -> bool {
    debug_assert!(a.len() >= n * n);
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            let l = a[j * n + k];
            diag = diag - l * l;
        }
        // Tolerate rounding-level negativity on a semidefinite pivot.
        let scale = a[j * n + j].abs().max(T::one());
        let tol = T::from_f64_lossy(-1e-12) * scale;
        if diag < tol {
            return false;
        }
        let pivot = if diag > T::zero() { diag.sqrt() } else { T::zero() };
        a[j * n + j] = pivot;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v = v - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = if pivot > T::zero() { v / pivot } else { T::zero() };
        }
    }
    true
}

/// Solves `L v = b` in place for lower-triangular `L` with positive diagonal.
pub(crate) fn forward_solve_in_place<T: Scalar>(l: &[T], n: usize, v: &mut [T]) {
    for i in 0..n {
        let mut acc = v[i];
        for k in 0..i {
            acc = acc - l[i * n + k] * v[k];
        }
        v[i] = acc / l[i * n + i];
    }
}
