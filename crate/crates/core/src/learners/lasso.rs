//! L1-regularized least squares by cyclic coordinate descent.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{LearnError, Standardizer};
use crate::scalar::Scalar;

pub const LASSO_TOL: f64 = 1e-6;
pub const LASSO_MAX_SWEEPS: usize = 10_000;

fn soft_threshold<T: Scalar>(z: T, gamma: T) -> T {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        T::zero()
    }
}

/// Minimizes `(1/2n)‖y - Xw‖² + alpha‖w‖₁` for a design that is already
/// centered (no intercept). Returns the weights and the sweeps used.
pub fn coordinate_descent<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    alpha: T,
    tol: T,
    max_sweeps: usize,
) -> (Array1<T>, usize) {
    let (n, d) = x.dim();
    let nf = T::of_usize(n.max(1));
    let col_sq: Vec<T> = (0..d).map(|j| x.column(j).dot(&x.column(j)) / nf).collect();
    let mut w = Array1::<T>::zeros(d);
    let mut r = y.to_owned();
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_change = T::zero();
        for j in 0..d {
            if col_sq[j] == T::zero() {
                continue;
            }
            let xj = x.column(j);
            let old = w[j];
            let rho = xj.dot(&r) / nf + col_sq[j] * old;
            let new = soft_threshold(rho, alpha) / col_sq[j];
            if new != old {
                r.scaled_add(old - new, &xj);
                w[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        if max_change < tol {
            break;
        }
    }
    (w, sweeps)
}

/// Largest violation of the Lasso subgradient conditions at `w`:
/// `|g_j| <= alpha` where `w_j = 0`, `g_j = -alpha sign(w_j)` otherwise,
/// with `g = (1/n) Xᵀ(Xw - y)`.
pub fn kkt_violation<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>, w: ArrayView1<T>, alpha: T) -> T {
    let n = T::of_usize(x.nrows().max(1));
    let resid = &x.dot(&w) - &y;
    let grad = x.t().dot(&resid) / n;
    grad.iter()
        .zip(w.iter())
        .map(|(&g, &wj)| {
            if wj == T::zero() {
                (g.abs() - alpha).max(T::zero())
            } else {
                (g + alpha * wj.signum()).abs()
            }
        })
        .fold(T::zero(), T::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LassoModel<T> {
    pub standardizer: Standardizer<T>,
    /// Weights on standardized features.
    pub coef: Array1<T>,
    pub intercept: T,
    pub sweeps: usize,
}

impl<T: Scalar> LassoModel<T> {
    pub fn fit(x: ArrayView2<T>, y: ArrayView1<T>, alpha: T) -> Result<Self, LearnError> {
        if !(alpha >= T::zero()) {
            return Err(LearnError::InvalidHyper {
                name: "alpha",
                value: alpha.as_f64(),
            });
        }
        let standardizer = Standardizer::fit(x);
        let xs = standardizer.transform(x);
        let intercept = y.mean().unwrap_or_else(T::zero);
        let yc = y.mapv(|v| v - intercept);
        let (coef, sweeps) = coordinate_descent(xs.view(), yc.view(), alpha, T::of(LASSO_TOL), LASSO_MAX_SWEEPS);
        Ok(LassoModel {
            standardizer,
            coef,
            intercept,
            sweeps,
        })
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Array1<T> {
        self.standardizer
            .transform(x)
            .dot(&self.coef)
            .mapv(|v| v + self.intercept)
    }

    /// The standardized, centered problem the weights solve.
    pub fn design(&self, x: ArrayView2<T>, y: ArrayView1<T>) -> (Array2<T>, Array1<T>) {
        (self.standardizer.transform(x), y.mapv(|v| v - self.intercept))
    }
}

/// Smallest alpha at which every weight is zero: `max_j |x_jᵀ y| / n`.
pub fn alpha_max<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>) -> T {
    let n = T::of_usize(x.nrows().max(1));
    x.t().dot(&y).iter().fold(T::zero(), |m, v| m.max(v.abs())) / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_target_zero_model() {
        let x = array![[1.0, 2.0], [3.0, 1.0], [0.5, 0.0]];
        let m = LassoModel::fit(x.view(), Array1::zeros(3).view(), 0.01).unwrap();
        assert!(m.coef.iter().all(|&w| w == 0.0));
        assert_eq!(m.intercept, 0.0);
    }

    #[test]
    fn large_alpha_kills_all_weights() {
        let x = array![[1.0, 2.0], [3.0, 1.0], [0.5, 0.0], [2.0, 2.0]];
        let y = array![1.0, 4.0, 0.0, 2.5];
        let probe = LassoModel::fit(x.view(), y.view(), 0.0).unwrap();
        let (xs, yc) = probe.design(x.view(), y.view());
        let amax = alpha_max(xs.view(), yc.view());
        let m = LassoModel::fit(x.view(), y.view(), amax).unwrap();
        assert!(m.coef.iter().all(|&w| w == 0.0));
        let m = LassoModel::fit(x.view(), y.view(), amax * 0.9).unwrap();
        assert!(m.coef.iter().any(|&w| w != 0.0));
    }

    /// Dense grid search over (w1, w2) on a 5x2 problem, refined around the
    /// best cell, against coordinate descent.
    #[test]
    fn matches_grid_oracle_on_5x2() {
        let xs = array![[1.2, -0.4], [-0.7, 1.1], [0.3, 0.9], [-1.5, -0.8], [0.7, -0.8]];
        let y = array![1.0, -0.5, 0.8, -2.0, 0.7];
        let alpha = 0.1;
        let objective = |w0: f64, w1: f64| {
            let mut s = 0.0;
            for i in 0..5 {
                let e = y[i] - xs[[i, 0]] * w0 - xs[[i, 1]] * w1;
                s += e * e;
            }
            s / 10.0 + alpha * (w0.abs() + w1.abs())
        };
        let (mut c0, mut c1, mut step) = (0.0, 0.0, 0.5);
        for _ in 0..40 {
            let mut best = (f64::INFINITY, c0, c1);
            for a in -20..=20 {
                for b in -20..=20 {
                    let (w0, w1) = (c0 + a as f64 * step / 10.0, c1 + b as f64 * step / 10.0);
                    let f = objective(w0, w1);
                    if f < best.0 {
                        best = (f, w0, w1);
                    }
                }
            }
            c0 = best.1;
            c1 = best.2;
            step /= 2.0;
        }
        let (w, _) = coordinate_descent(xs.view(), y.view(), alpha, 1e-12, LASSO_MAX_SWEEPS);
        assert!((w[0] - c0).abs() < 1e-4, "{} vs {c0}", w[0]);
        assert!((w[1] - c1).abs() < 1e-4, "{} vs {c1}", w[1]);
        assert!(kkt_violation(xs.view(), y.view(), w.view(), alpha) < 1e-4);
    }

    #[test]
    fn f32_fit_runs() {
        let x = array![[1.0f32, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 0.5]];
        let y = array![1.0f32, 0.0, 1.0, 2.0];
        let m = LassoModel::fit(x.view(), y.view(), 0.01).unwrap();
        let p = m.predict(x.view());
        assert!((p[3] - 2.0).abs() < 0.2);
    }
}
