//! Small dense linear algebra for proposal covariances (row-major storage).

use crate::real::Real;

/// Lower Cholesky factor of a symmetric positive definite `n x n` matrix, or
/// `None` if a pivot is not strictly positive.
pub fn cholesky<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    assert_eq!(a.len(), n * n);
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// `L z` for lower-triangular `L`.
pub fn lower_mul<T: Real>(l: &[T], z: &[T]) -> Vec<T> {
    let n = z.len();
    (0..n)
        .map(|i| (0..=i).map(|k| l[i * n + k] * z[k]).sum())
        .collect()
}

/// Solves `L y = b` by forward substitution.
pub fn forward_solve<T: Real>(l: &[T], b: &[T]) -> Vec<T> {
    let n = b.len();
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// `log det(L Lᵀ)`.
pub fn log_det_from_cholesky<T: Real>(l: &[T], n: usize) -> T {
    (0..n).map(|i| l[i * n + i].ln()).sum::<T>() * T::lit(2.0)
}

/// Log density of `N(mean, L Lᵀ)` at `x`.
pub fn mvn_log_density<T: Real>(x: &[T], mean: &[T], l: &[T]) -> T {
    let n = x.len();
    let diff: Vec<T> = x.iter().zip(mean).map(|(&a, &b)| a - b).collect();
    let y = forward_solve(l, &diff);
    let quad: T = y.iter().map(|&v| v * v).sum();
    let two_pi = T::lit(2.0) * T::PI();
    -T::lit(0.5) * (T::from_usize_lossy(n) * two_pi.ln() + log_det_from_cholesky(l, n) + quad)
}
