//! Dense symmetric positive-definite solves.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::LearnError;
use crate::scalar::Scalar;

/// Lower-triangular `L` with `A = L Lᵀ`.
pub fn cholesky<T: Scalar>(a: ArrayView2<T>) -> Result<Array2<T>, LearnError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LearnError::Shape(format!("cholesky of a {}x{} matrix", n, a.ncols())));
    }
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(LearnError::NotPositiveDefinite { pivot: j });
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` by forward then backward substitution.
pub fn cholesky_solve<T: Scalar>(l: ArrayView2<T>, b: ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut z = Array1::<T>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * z[k];
        }
        z[i] = s / l[[i, i]];
    }
    let mut x = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// `b - A x`.
pub fn residual<T: Scalar>(a: ArrayView2<T>, x: ArrayView1<T>, b: ArrayView1<T>) -> Array1<T> {
    &b - &a.dot(&x)
}

pub fn max_abs<T: Scalar>(v: ArrayView1<T>) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Cholesky solve followed by iterative refinement until the residual
/// max-norm drops below `tol` or stops improving. Returns the solution and
/// its final residual max-norm.
pub fn solve_spd<T: Scalar>(a: ArrayView2<T>, b: ArrayView1<T>, tol: T) -> Result<(Array1<T>, T), LearnError> {
    let l = cholesky(a)?;
    let mut x = cholesky_solve(l.view(), b);
    let mut r = residual(a, x.view(), b);
    let mut norm = max_abs(r.view());
    for _ in 0..20 {
        if norm < tol {
            break;
        }
        let dx = cholesky_solve(l.view(), r.view());
        let candidate = &x + &dx;
        let r_next = residual(a, candidate.view(), b);
        let next = max_abs(r_next.view());
        if !(next < norm) {
            break;
        }
        x = candidate;
        r = r_next;
        norm = next;
    }
    Ok((x, norm))
}
