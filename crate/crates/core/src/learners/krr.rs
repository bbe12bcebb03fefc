//! Kernel ridge regression with an RBF kernel.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::linalg::{max_abs, residual, solve_spd};
use super::{LearnError, Standardizer};
use crate::scalar::Scalar;

/// Target max-norm of `(K + alpha I) a - y` after refinement.
pub const KRR_RESIDUAL_TOL: f64 = 1e-8;

pub fn rbf<T: Scalar>(a: ArrayView1<T>, b: ArrayView1<T>, gamma: T) -> T {
    let d2 = a.iter().zip(b.iter()).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>();
    (-gamma * d2).exp()
}

pub fn kernel_matrix<T: Scalar>(a: ArrayView2<T>, b: ArrayView2<T>, gamma: T) -> Array2<T> {
    Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| rbf(a.row(i), b.row(j), gamma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KrrModel<T> {
    pub standardizer: Standardizer<T>,
    pub gamma: T,
    pub alpha: T,
    /// Standardized training inputs.
    pub support: Array2<T>,
    pub dual: Array1<T>,
    /// `‖(K + alpha I) a - y‖∞` at the returned solution.
    pub residual: T,
}

impl<T: Scalar> KrrModel<T> {
    /// `gamma = None` uses `1 / d`.
    pub fn fit(x: ArrayView2<T>, y: ArrayView1<T>, alpha: T, gamma: Option<T>) -> Result<Self, LearnError> {
        if !(alpha >= T::zero()) {
            return Err(LearnError::InvalidHyper {
                name: "alpha",
                value: alpha.as_f64(),
            });
        }
        let gamma = gamma.unwrap_or_else(|| T::one() / T::of_usize(x.ncols().max(1)));
        if !(gamma > T::zero()) {
            return Err(LearnError::InvalidHyper {
                name: "rbf_gamma",
                value: gamma.as_f64(),
            });
        }
        let standardizer = Standardizer::fit(x);
        let support = standardizer.transform(x);
        let mut k = kernel_matrix(support.view(), support.view(), gamma);
        for i in 0..k.nrows() {
            k[[i, i]] += alpha;
        }
        let (dual, _) = solve_spd(k.view(), y, T::of(KRR_RESIDUAL_TOL))?;
        let residual = max_abs(residual(k.view(), dual.view(), y).view());
        Ok(KrrModel {
            standardizer,
            gamma,
            alpha,
            support,
            dual,
            residual,
        })
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Array1<T> {
        let xs = self.standardizer.transform(x);
        kernel_matrix(xs.view(), self.support.view(), self.gamma).dot(&self.dual)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_point_scalar_solve() {
        let x = array![[3.0f64, -1.0]];
        let m = KrrModel::fit(x.view(), array![5.0].view(), 0.1, None).unwrap();
        assert!((m.dual[0] - 5.0 / 1.1).abs() < 1e-12);
        assert!((m.predict(x.view())[0] - 5.0 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn tiny_alpha_interpolates() {
        let x = array![[0.0f64], [1.0], [2.5], [4.0], [5.0]];
        let y = array![1.0, -1.0, 0.5, 2.0, 0.0];
        let m = KrrModel::fit(x.view(), y.view(), 1e-8, None).unwrap();
        let p = m.predict(x.view());
        for (a, b) in p.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    /// Gauss-Jordan inverse of `K + alpha I` as an independent oracle.
    #[test]
    fn matches_explicit_inverse() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 * 0.37 - 1.0);
        let y = Array1::from_shape_fn(10, |i| (i as f64 * 0.9).sin());
        let m = KrrModel::fit(x.view(), y.view(), 0.1, None).unwrap();
        assert!(m.residual < 1e-8);
        let mut k = kernel_matrix(m.support.view(), m.support.view(), m.gamma);
        for i in 0..10 {
            k[[i, i]] += 0.1;
        }
        let n = 10;
        let mut aug = Array2::<f64>::zeros((n, 2 * n));
        for i in 0..n {
            for j in 0..n {
                aug[[i, j]] = k[[i, j]];
            }
            aug[[i, n + i]] = 1.0;
        }
        for c in 0..n {
            let p = (c..n)
                .max_by(|&a, &b| aug[[a, c]].abs().total_cmp(&aug[[b, c]].abs()))
                .unwrap();
            for j in 0..2 * n {
                aug.swap([c, j], [p, j]);
            }
            let piv = aug[[c, c]];
            for j in 0..2 * n {
                aug[[c, j]] /= piv;
            }
            for r in 0..n {
                if r != c {
                    let f = aug[[r, c]];
                    for j in 0..2 * n {
                        aug[[r, j]] -= f * aug[[c, j]];
                    }
                }
            }
        }
        let inv = aug.slice(ndarray::s![.., n..]).to_owned();
        let oracle = inv.dot(&y);
        for (a, b) in m.dual.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn duplicate_rows_without_ridge_fail() {
        let x = array![[1.0], [1.0], [2.0]];
        let r = KrrModel::fit(x.view(), array![1.0, 1.0, 2.0].view(), 0.0, None);
        assert!(matches!(r, Err(LearnError::NotPositiveDefinite { .. })));
    }
}
