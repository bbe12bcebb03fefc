//! Exact greedy regression trees, shared by the forest and both boosters.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Split quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Criterion {
    /// Squared-error reduction `n_l n_r / n (mean_l - mean_r)^2`.
    Mse,
    /// Second-order gain over (gradient, hessian) sums with an L2 leaf
    /// penalty `lambda`; a split must gain more than `min_split_loss`.
    Newton { lambda: f64, min_split_loss: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub criterion: Criterion,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            criterion: Criterion::Mse,
        }
    }
}

/// Internal nodes send `x[feature] <= threshold` left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Node<T> {
    pub feature: Option<usize>,
    pub threshold: Option<T>,
    pub left: Option<Box<Node<T>>>,
    pub right: Option<Box<Node<T>>>,
    pub value: T,
}

impl<T: Scalar> Node<T> {
    fn leaf(value: T) -> Self {
        Node {
            feature: None,
            threshold: None,
            left: None,
            right: None,
            value,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }

    pub fn depth(&self) -> usize {
        match (&self.left, &self.right) {
            (Some(l), Some(r)) => 1 + l.depth().max(r.depth()),
            _ => 0,
        }
    }

    pub fn n_leaves(&self) -> usize {
        match (&self.left, &self.right) {
            (Some(l), Some(r)) => l.n_leaves() + r.n_leaves(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegressionTree<T> {
    pub root: Node<T>,
    pub n_features: usize,
    /// Total split gain credited to each feature.
    pub importance: Vec<T>,
}

#[derive(Debug, Clone, Copy)]
struct Split<T> {
    feature: usize,
    threshold: T,
    gain: T,
}

struct Builder<'a, T> {
    x: ArrayView2<'a, T>,
    g: &'a [T],
    h: &'a [T],
    params: TreeParams,
    importance: Vec<T>,
}

impl<T: Scalar> Builder<'_, T> {
    fn sums(&self, idx: &[usize]) -> (T, T) {
        idx.iter()
            .fold((T::zero(), T::zero()), |(g, h), &i| (g + self.g[i], h + self.h[i]))
    }

    fn leaf_value(&self, g: T, h: T) -> T {
        match self.params.criterion {
            Criterion::Mse => {
                if h > T::zero() {
                    g / h
                } else {
                    T::zero()
                }
            }
            Criterion::Newton { lambda, .. } => g / (h + T::of(lambda)),
        }
    }

    fn gain(&self, gl: T, hl: T, gr: T, hr: T) -> T {
        match self.params.criterion {
            Criterion::Mse => {
                let diff = gl / hl - gr / hr;
                hl * hr / (hl + hr) * diff * diff
            }
            Criterion::Newton { lambda, .. } => {
                let l = T::of(lambda);
                let (g, h) = (gl + gr, hl + hr);
                T::of(0.5) * (gl * gl / (hl + l) + gr * gr / (hr + l) - g * g / (h + l))
            }
        }
    }

    fn min_gain(&self) -> T {
        match self.params.criterion {
            Criterion::Mse => T::zero(),
            Criterion::Newton { min_split_loss, .. } => T::of(min_split_loss),
        }
    }

    /// Best split over all features and midpoints; ties keep the lowest
    /// feature, then the lowest threshold.
    fn best_split(&self, idx: &[usize]) -> Option<Split<T>> {
        let min_leaf = self.params.min_samples_leaf.max(1);
        let (g_total, h_total) = self.sums(idx);
        let mut best: Option<Split<T>> = None;
        let mut order = idx.to_vec();
        for f in 0..self.x.ncols() {
            let col = self.x.column(f);
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let (mut gl, mut hl) = (T::zero(), T::zero());
            for k in 0..order.len() - 1 {
                let i = order[k];
                gl += self.g[i];
                hl += self.h[i];
                let (lo, hi) = (col[i], col[order[k + 1]]);
                if lo == hi || k + 1 < min_leaf || order.len() - k - 1 < min_leaf {
                    continue;
                }
                let (gr, hr) = (g_total - gl, h_total - hl);
                let gain = self.gain(gl, hl, gr, hr);
                if gain > self.min_gain() && best.is_none_or(|b| gain > b.gain) {
                    let mid = lo + (hi - lo) / T::of(2.0);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> Node<T> {
        let (g, h) = self.sums(&idx);
        let value = self.leaf_value(g, h);
        let pure = matches!(self.params.criterion, Criterion::Mse)
            && idx
                .iter()
                .all(|&i| self.g[i] / self.h[i] == self.g[idx[0]] / self.h[idx[0]]);
        if idx.len() < self.params.min_samples_split.max(2) || self.params.max_depth.is_some_and(|d| depth >= d) || pure
        {
            return Node::leaf(value);
        }
        let Some(split) = self.best_split(&idx) else {
            return Node::leaf(value);
        };
        self.importance[split.feature] += split.gain;
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x[[i, split.feature]] <= split.threshold);
        Node {
            feature: Some(split.feature),
            threshold: Some(split.threshold),
            left: Some(Box::new(self.grow(left, depth + 1))),
            right: Some(Box::new(self.grow(right, depth + 1))),
            value,
        }
    }
}

impl<T: Scalar> RegressionTree<T> {
    /// Least-squares tree on the rows `idx` (repeats allowed, as in a
    /// bootstrap sample).
    pub fn fit_rows(x: ArrayView2<T>, y: ArrayView1<T>, idx: Vec<usize>, params: TreeParams) -> Self {
        let g: Vec<T> = y.to_vec();
        let h = vec![T::one(); y.len()];
        Self::fit_gradients(x, &g, &h, idx, params)
    }

    pub fn fit(x: ArrayView2<T>, y: ArrayView1<T>, params: TreeParams) -> Self {
        Self::fit_rows(x, y, (0..x.nrows()).collect(), params)
    }

    /// Tree over per-row (gradient, hessian) pairs. With the MSE criterion
    /// and unit hessians this is an ordinary regression tree on `g`.
    pub fn fit_gradients(x: ArrayView2<T>, g: &[T], h: &[T], idx: Vec<usize>, params: TreeParams) -> Self {
        let mut b = Builder {
            x,
            g,
            h,
            params,
            importance: vec![T::zero(); x.ncols()],
        };
        let root = if idx.is_empty() {
            Node::leaf(T::zero())
        } else {
            b.grow(idx, 0)
        };
        RegressionTree {
            root,
            n_features: x.ncols(),
            importance: b.importance,
        }
    }

    pub fn predict_row(&self, row: ArrayView1<T>) -> T {
        let mut node = &self.root;
        while let (Some(f), Some(t), Some(l), Some(r)) = (node.feature, node.threshold, &node.left, &node.right) {
            node = if row[f] <= t { l } else { r };
        }
        node.value
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Array1<T> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }
}
