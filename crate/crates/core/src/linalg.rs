//! Dense symmetric positive-definite solves used by the GP surrogate and IRLS.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::Scalar;

/// Lower-triangular Cholesky factor of `a`, or `None` if a pivot is not
/// strictly positive.
pub fn cholesky<T: Scalar>(a: ArrayView2<'_, T>) -> Option<Array2<T>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d = d - l[[j, k]] * l[[j, k]];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s = s - l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / djj;
        }
    }
    Some(l)
}

/// Cholesky factor of `a + jitter·I`, growing the jitter tenfold from
/// `initial` until the factorization succeeds. Returns the factor and the
/// jitter actually added (zero when `a` factors as is).
pub fn cholesky_with_jitter<T: Scalar>(a: ArrayView2<'_, T>, initial: T) -> Option<(Array2<T>, T)> {
    if let Some(l) = cholesky(a) {
        return Some((l, T::zero()));
    }
    let n = a.nrows();
    let mean_diag = (0..n).map(|i| a[[i, i]].abs()).sum::<T>() / T::of(n.max(1) as f64);
    let mut jitter = initial.max(mean_diag * T::epsilon());
    for _ in 0..20 {
        let mut shifted = a.to_owned();
        for i in 0..n {
            shifted[[i, i]] = shifted[[i, i]] + jitter;
        }
        if let Some(l) = cholesky(shifted.view()) {
            return Some((l, jitter));
        }
        jitter = jitter * T::of(10.0);
    }
    None
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn solve_lower<T: Scalar>(l: ArrayView2<'_, T>, b: ArrayView1<'_, T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = Array1::<T>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// Solves `Lᵀ x = y` for lower-triangular `L`.
pub fn solve_upper_transposed<T: Scalar>(l: ArrayView2<'_, T>, y: ArrayView1<'_, T>) -> Array1<T> {
    let n = l.nrows();
    let mut x = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s = s - l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves `(L Lᵀ) x = b`.
pub fn cholesky_solve<T: Scalar>(l: ArrayView2<'_, T>, b: ArrayView1<'_, T>) -> Array1<T> {
    let y = solve_lower(l, b);
    solve_upper_transposed(l, y.view())
}

/// Flags columns of a Gram matrix `XᵀX` that are (numerically) linear
/// combinations of earlier columns. A column is aliased when its Cholesky
/// pivot falls below `tol` times its own diagonal entry.
pub fn aliased_columns<T: Scalar>(gram: ArrayView2<'_, T>, tol: T) -> Vec<bool> {
    let n = gram.nrows();
    let mut aliased = vec![false; n];
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let diag = gram[[j, j]];
        let mut d = diag;
        for k in 0..j {
            if !aliased[k] {
                d = d - l[[j, k]] * l[[j, k]];
            }
        }
        if !(diag > T::zero()) || !(d > tol * diag) {
            aliased[j] = true;
            continue;
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut s = gram[[i, j]];
            for k in 0..j {
                if !aliased[k] {
                    s = s - l[[i, k]] * l[[j, k]];
                }
            }
            l[[i, j]] = s / djj;
        }
    }
    aliased
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_small_spd_system() {
        let a = array![[4.0f64, 2.0], [2.0, 3.0]];
        let l = cholesky(a.view()).unwrap();
        let x = cholesky_solve(l.view(), array![2.0, 1.0].view());
        let back = a.dot(&x);
        assert!((back[0] - 2.0).abs() < 1e-12);
        assert!((back[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_needs_jitter() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(cholesky(a.view()).is_none());
        let (_, jitter) = cholesky_with_jitter(a.view(), 1e-10).unwrap();
        assert!(jitter > 0.0);
    }

    #[test]
    fn duplicate_column_is_aliased() {
        // columns: 1, x, x
        let gram = array![[3.0, 6.0, 6.0], [6.0, 14.0, 14.0], [6.0, 14.0, 14.0]];
        assert_eq!(aliased_columns(gram.view(), 1e-9), vec![false, false, true]);
    }

    #[test]
    fn works_in_single_precision() {
        let a = array![[2.0f32, 0.5], [0.5, 1.0]];
        let l = cholesky(a.view()).unwrap();
        let x = cholesky_solve(l.view(), array![1.0f32, 1.0].view());
        let back = a.dot(&x);
        assert!((back[0] - 1.0).abs() < 1e-5);
    }
}
