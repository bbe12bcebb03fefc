//! Least-squares gradient boosting with depth-limited trees.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GbdtModel<T> {
    pub init: T,
    pub learning_rate: T,
    pub trees: Vec<RegressionTree<T>>,
    /// Training MSE before the first stage and after every stage.
    pub train_loss: Vec<T>,
}

fn mse<T: Scalar>(y: ArrayView1<T>, f: &Array1<T>) -> T {
    let n = T::of_usize(y.len().max(1));
    y.iter().zip(f.iter()).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>() / n
}

impl<T: Scalar> GbdtModel<T> {
    pub fn fit(x: ArrayView2<T>, y: ArrayView1<T>, n_stages: usize, learning_rate: T, params: TreeParams) -> Self {
        let init = y.mean().unwrap_or_else(T::zero);
        let mut f = Array1::from_elem(y.len(), init);
        let mut train_loss = vec![mse(y, &f)];
        let mut trees = Vec::with_capacity(n_stages);
        for stage in 0..n_stages {
            let resid = &y - &f;
            let tree = RegressionTree::fit(x, resid.view(), params);
            f.zip_mut_with(&tree.predict(x), |fi, p| *fi += learning_rate * *p);
            let loss = mse(y, &f);
            let prev = train_loss[train_loss.len() - 1];
            if loss > prev {
                log::warn!("boosting stage {stage} raised training loss from {prev} to {loss}");
            }
            train_loss.push(loss);
            trees.push(tree);
        }
        GbdtModel {
            init,
            learning_rate,
            trees,
            train_loss,
        }
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Array1<T> {
        let mut f = Array1::from_elem(x.nrows(), self.init);
        for t in &self.trees {
            f.zip_mut_with(&t.predict(x), |fi, p| *fi += self.learning_rate * *p);
        }
        f
    }

    /// True when every stage kept or lowered the training loss.
    pub fn loss_non_increasing(&self) -> bool {
        self.train_loss.windows(2).all(|w| w[1] <= w[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stumps() -> TreeParams {
        TreeParams {
            max_depth: Some(1),
            ..Default::default()
        }
    }

    #[test]
    fn zero_stages_predicts_mean() {
        let x = Array2::from_shape_fn((4, 1), |(i, _)| i as f64);
        let y = Array1::from(vec![1.0, 2.0, 3.0, 6.0]);
        let m = GbdtModel::fit(x.view(), y.view(), 0, 0.1, stumps());
        assert!(m.predict(x.view()).iter().all(|&v| v == 3.0));
    }

    /// Three stumps with learning rate 1, unrolled by hand: each stage
    /// fits the best stump to the current residuals.
    #[test]
    fn matches_hand_unrolled_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Array2::from_shape_fn((20, 1), |(i, _)| i as f64);
        let y = Array1::from_shape_fn(20, |_| rng.random_range(-5.0..5.0));
        let m = GbdtModel::fit(x.view(), y.view(), 3, 1.0, stumps());
        let mean = y.sum() / 20.0;
        let mut f = vec![mean; 20];
        for _ in 0..3 {
            let r: Vec<f64> = (0..20).map(|i| y[i] - f[i]).collect();
            let mut best = (0.0, 0usize);
            for s in 1..20 {
                let (l, rr) = r.split_at(s);
                let ml = l.iter().sum::<f64>() / l.len() as f64;
                let mr = rr.iter().sum::<f64>() / rr.len() as f64;
                let gain = (s * (20 - s)) as f64 / 20.0 * (ml - mr).powi(2);
                if gain > best.0 {
                    best = (gain, s);
                }
            }
            let s = best.1;
            let ml = r[..s].iter().sum::<f64>() / s as f64;
            let mr = r[s..].iter().sum::<f64>() / (20 - s) as f64;
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += if i < s { ml } else { mr };
            }
        }
        for (a, b) in m.predict(x.view()).iter().zip(&f) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn training_loss_never_rises() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((80, 4), |_| rng.random::<f64>());
            let y = Array1::from_shape_fn(80, |i| x[[i, 0]] * 10.0 + rng.random::<f64>());
            let params = TreeParams {
                max_depth: Some(3),
                ..Default::default()
            };
            let m = GbdtModel::fit(x.view(), y.view(), 100, 0.1, params);
            assert_eq!(m.train_loss.len(), 101);
            assert!(m.loss_non_increasing());
            assert!(m.train_loss[100] < m.train_loss[0]);
        }
    }
}
