//! Bagged regression trees and impurity-decrease importance.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ForestModel<T> {
    pub trees: Vec<RegressionTree<T>>,
}

/// Bootstrap row sample for tree `t`; each tree owns one ChaCha stream.
pub fn bootstrap_rows(n: usize, seed: u64, t: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

impl<T: Scalar> ForestModel<T> {
    pub fn fit(
        x: ArrayView2<T>,
        y: ArrayView1<T>,
        n_trees: usize,
        params: TreeParams,
        bootstrap: bool,
        seed: u64,
    ) -> Self {
        let n = x.nrows();
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let rows = if bootstrap {
                    bootstrap_rows(n, seed, t)
                } else {
                    (0..n).collect()
                };
                RegressionTree::fit_rows(x, y, rows, params)
            })
            .collect();
        ForestModel { trees }
    }

    /// Arithmetic mean of the trees' predictions.
    pub fn predict(&self, x: ArrayView2<T>) -> Array1<T> {
        let mut sum = Array1::<T>::zeros(x.nrows());
        for t in &self.trees {
            sum = sum + t.predict(x);
        }
        sum / T::of_usize(self.trees.len().max(1))
    }

    /// Per-tree normalized impurity decrease averaged over trees and
    /// renormalized; uniform when no tree ever split.
    pub fn feature_importance(&self) -> Vec<T> {
        let d = self.trees.first().map_or(0, |t| t.n_features);
        let mut total = vec![T::zero(); d];
        for t in &self.trees {
            let s: T = t.importance.iter().copied().sum();
            if s > T::zero() {
                for (acc, v) in total.iter_mut().zip(&t.importance) {
                    *acc += *v / s;
                }
            }
        }
        let s: T = total.iter().copied().sum();
        if s > T::zero() {
            total.iter().map(|v| *v / s).collect()
        } else {
            vec![T::one() / T::of_usize(d.max(1)); d]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn data(seed: u64, n: usize) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>());
        let y = x.rows().into_iter().map(|r| 3.0 * r[0] + (6.0 * r[1]).sin()).collect();
        (x, y)
    }

    #[test]
    fn single_unbagged_tree_equals_plain_tree() {
        let (x, y) = data(1, 60);
        let f = ForestModel::fit(x.view(), y.view(), 1, TreeParams::default(), false, 0);
        let t = RegressionTree::fit(x.view(), y.view(), TreeParams::default());
        assert_eq!(f.predict(x.view()), t.predict(x.view()));
    }

    #[test]
    fn prediction_is_mean_of_trees() {
        let (x, y) = data(2, 80);
        let f = ForestModel::fit(x.view(), y.view(), 10, TreeParams::default(), true, 5);
        let p = f.predict(x.view());
        for i in 0..x.nrows() {
            let mut s = 0.0;
            for t in &f.trees {
                s += t.predict_row(x.row(i));
            }
            assert_eq!(p[i], s / 10.0);
        }
    }

    #[test]
    fn seeded_and_reproducible() {
        let (x, y) = data(3, 50);
        let a = ForestModel::fit(x.view(), y.view(), 10, TreeParams::default(), true, 9);
        let b = ForestModel::fit(x.view(), y.view(), 10, TreeParams::default(), true, 9);
        assert_eq!(a, b);
        let c = ForestModel::fit(x.view(), y.view(), 10, TreeParams::default(), true, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn constant_target_constant_forest_uniform_importance() {
        let (x, _) = data(4, 30);
        let y = Array1::from_elem(30, 4.0);
        let f = ForestModel::fit(x.view(), y.view(), 10, TreeParams::default(), true, 1);
        assert!(f.predict(x.view()).iter().all(|&v| v == 4.0));
        assert_eq!(f.feature_importance(), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn single_feature_signal_dominates_importance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Array2::from_shape_fn((200, 4), |_| rng.random::<f64>());
        let y = x.column(0).mapv(|v| 5.0 * v + 1.0);
        let f = ForestModel::fit(x.view(), y.view(), 10, TreeParams::default(), true, 2);
        let imp = f.feature_importance();
        assert!(imp[0] > 0.9, "{imp:?}");
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn permuting_columns_permutes_importance() {
        let (x, y) = data(7, 100);
        let perm = [2, 0, 1];
        // shallow trees avoid exact gain ties in tiny nodes, which break by column order
        let shallow = TreeParams {
            max_depth: Some(3),
            ..Default::default()
        };
        let xp = Array2::from_shape_fn(x.dim(), |(i, j)| x[[i, perm[j]]]);
        let a = ForestModel::fit(x.view(), y.view(), 1, shallow, false, 0).feature_importance();
        let b = ForestModel::fit(xp.view(), y.view(), 1, shallow, false, 0).feature_importance();
        for j in 0..3 {
            assert!((b[j] - a[perm[j]]).abs() < 1e-12);
        }
    }
}
