//! LambdaMART: boosted trees fit to pairwise lambda gradients weighted by
//! the nDCG change of swapping each pair.

use std::collections::BTreeMap;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, RegressionTree, TreeParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaMartParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub min_split_loss: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub max_depth: usize,
    /// Cut-off of the nDCG whose changes weight the pairs; `None` uses
    /// the whole group.
    pub ndcg_truncation: Option<usize>,
    pub sigma: f64,
}

impl Default for LambdaMartParams {
    fn default() -> Self {
        LambdaMartParams {
            n_stages: 100,
            learning_rate: 0.1,
            min_split_loss: 1.0,
            lambda: 1.0,
            max_depth: 3,
            ndcg_truncation: Some(10),
            sigma: 1.0,
        }
    }
}

/// Integer grades 0..=4 by within-group quintile of the target:
/// `min(4, floor(5 * #{j: y_j < y_i} / n))`.
pub fn quintile_grades<T: Scalar>(y: &[T]) -> Vec<u8> {
    let n = y.len();
    let mut sorted: Vec<T> = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    y.iter()
        .map(|v| {
            let less = sorted.partition_point(|s| s < v);
            (5 * less / n).min(4) as u8
        })
        .collect()
}

fn gain(grade: u8) -> f64 {
    (1u32 << grade) as f64 - 1.0
}

fn discount(pos: usize, k: usize) -> f64 {
    if pos < k {
        1.0 / ((pos + 2) as f64).log2()
    } else {
        0.0
    }
}

/// Row indices per group, groups in ascending id order.
pub fn group_rows(groups: Option<&[usize]>, n: usize) -> Vec<Vec<usize>> {
    match groups {
        None => vec![(0..n).collect()],
        Some(g) => {
            let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, &gid) in g.iter().enumerate() {
                by.entry(gid).or_default().push(i);
            }
            by.into_values().collect()
        }
    }
}

/// Positions of `rows` when sorted by descending score, ties by row.
fn positions<T: Scalar>(rows: &[usize], scores: &Array1<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        scores[rows[b]]
            .partial_cmp(&scores[rows[a]])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut pos = vec![0; rows.len()];
    for (p, &local) in order.iter().enumerate() {
        pos[local] = p;
    }
    pos
}

fn ideal_dcg(grades: &[u8], k: usize) -> f64 {
    let mut g: Vec<u8> = grades.to_vec();
    g.sort_unstable_by(|a, b| b.cmp(a));
    g.iter().enumerate().map(|(p, &gr)| gain(gr) * discount(p, k)).sum()
}

/// Mean graded nDCG@k over groups with a positive ideal DCG.
pub fn graded_ndcg<T: Scalar>(groups: &[Vec<usize>], grades: &[Vec<u8>], scores: &Array1<T>, k: usize) -> f64 {
    let mut total = 0.0;
    let mut counted = 0;
    for (rows, gr) in groups.iter().zip(grades) {
        let idcg = ideal_dcg(gr, k);
        if idcg <= 0.0 {
            continue;
        }
        let pos = positions(rows, scores);
        let dcg: f64 = gr.iter().zip(&pos).map(|(&g, &p)| gain(g) * discount(p, k)).sum();
        total += dcg / idcg;
        counted += 1;
    }
    if counted == 0 {
        1.0
    } else {
        total / counted as f64
    }
}

/// Lambda gradients and second-order weights for the current scores.
pub fn lambdas<T: Scalar>(
    groups: &[Vec<usize>],
    grades: &[Vec<u8>],
    scores: &Array1<T>,
    k: usize,
    sigma: f64,
) -> (Vec<T>, Vec<T>) {
    let n = scores.len();
    let mut lam = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    for (rows, gr) in groups.iter().zip(grades) {
        let idcg = ideal_dcg(gr, k);
        if rows.len() < 2 || idcg <= 0.0 {
            continue;
        }
        let pos = positions(rows, scores);
        for a in 0..rows.len() {
            for b in 0..rows.len() {
                if gr[a] <= gr[b] {
                    continue;
                }
                let delta = ((gain(gr[a]) - gain(gr[b])) * (discount(pos[a], k) - discount(pos[b], k))).abs() / idcg;
                if delta == 0.0 {
                    continue;
                }
                let (i, j) = (rows[a], rows[b]);
                let diff = (scores[i] - scores[j]).as_f64();
                let rho = 1.0 / (1.0 + (sigma * diff).exp());
                lam[i] += sigma * delta * rho;
                lam[j] -= sigma * delta * rho;
                let hess = sigma * sigma * delta * rho * (1.0 - rho);
                w[i] += hess;
                w[j] += hess;
            }
        }
    }
    (lam.into_iter().map(T::of).collect(), w.into_iter().map(T::of).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LambdaMartModel<T> {
    pub learning_rate: T,
    pub trees: Vec<RegressionTree<T>>,
    /// Training nDCG (graded, truncated) before the first stage and after
    /// every stage.
    pub train_ndcg: Vec<f64>,
}

impl<T: Scalar> LambdaMartModel<T> {
    pub fn fit(x: ArrayView2<T>, y: ArrayView1<T>, groups: Option<&[usize]>, params: &LambdaMartParams) -> Self {
        let n = x.nrows();
        let rows = group_rows(groups, n);
        let grades: Vec<Vec<u8>> = rows
            .iter()
            .map(|r| quintile_grades(&r.iter().map(|&i| y[i]).collect::<Vec<T>>()))
            .collect();
        let k = params.ndcg_truncation.unwrap_or(usize::MAX);
        let lr = T::of(params.learning_rate);
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            min_samples_split: 2,
            min_samples_leaf: 1,
            criterion: Criterion::Newton {
                lambda: params.lambda,
                min_split_loss: params.min_split_loss,
            },
        };
        let mut scores = Array1::<T>::zeros(n);
        let mut train_ndcg = vec![graded_ndcg(&rows, &grades, &scores, k)];
        let mut trees = Vec::with_capacity(params.n_stages);
        for _ in 0..params.n_stages {
            let (g, h) = lambdas(&rows, &grades, &scores, k, params.sigma);
            let tree = RegressionTree::fit_gradients(x, &g, &h, (0..n).collect(), tree_params);
            scores.zip_mut_with(&tree.predict(x), |s, p| *s += lr * *p);
            train_ndcg.push(graded_ndcg(&rows, &grades, &scores, k));
            trees.push(tree);
        }
        LambdaMartModel {
            learning_rate: lr,
            trees,
            train_ndcg,
        }
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Array1<T> {
        let mut s = Array1::<T>::zeros(x.nrows());
        for t in &self.trees {
            s.zip_mut_with(&t.predict(x), |si, p| *si += self.learning_rate * *p);
        }
        s
    }
}
