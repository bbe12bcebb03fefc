//! Ranking-quality metrics with continuous relevance.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::scalar::Scalar;

/// Ordered item ids, best first, with optional scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    ids: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<Vec<f64>>,
}

impl RankedList {
    pub fn new(ids: Vec<String>) -> Result<Self, EvalError> {
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(EvalError::DuplicateId(dup.clone()));
        }
        Ok(RankedList { ids, scores: None })
    }

    /// Items sorted by descending score, ties by ascending id.
    pub fn from_scores(ids: &[String], scores: &[f64]) -> Result<Self, EvalError> {
        if ids.len() != scores.len() {
            return Err(EvalError::Shape(format!("{} ids, {} scores", ids.len(), scores.len())));
        }
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| ids[a].cmp(&ids[b])));
        let mut list = RankedList::new(order.iter().map(|&i| ids[i].clone()).collect())?;
        list.scores = Some(order.iter().map(|&i| scores[i]).collect());
        Ok(list)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn top(&self, k: usize) -> &[String] {
        &self.ids[..k.min(self.ids.len())]
    }

    fn ranks(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i + 1))
            .collect()
    }
}

fn rel_of_rank(rank: usize, n: usize) -> f64 {
    (n - rank + 1) as f64 / n as f64
}

/// `(|L| - rank + 1) / |L|` for `item` in the actual ranking.
pub fn relevance(actual: &RankedList, item: &str) -> Result<f64, EvalError> {
    let pos = actual
        .ids
        .iter()
        .position(|id| id == item)
        .ok_or_else(|| EvalError::UnknownItem(item.to_string()))?;
    Ok(rel_of_rank(pos + 1, actual.len()))
}

fn discount<T: Scalar>(i: usize) -> T {
    T::one() / T::of_usize(i + 2).log2()
}

/// `sum (2^rel - 1) / log2(i + 1)` over the first `k` positions.
pub fn dcg<T: Scalar>(rel: &[T], k: usize) -> T {
    let two = T::of(2.0);
    rel.iter()
        .take(k)
        .enumerate()
        .map(|(i, &r)| (two.powf(r) - T::one()) * discount::<T>(i))
        .sum()
}

/// nDCG@k of relevances in predicted order against their own ideal order.
/// A list whose ideal DCG is zero scores 1.
pub fn ndcg_from_relevance<T: Scalar>(rel: &[T], k: usize) -> T {
    let mut ideal = rel.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(&ideal, k);
    if idcg > T::zero() {
        dcg(rel, k) / idcg
    } else {
        T::one()
    }
}

/// nDCG@k of `predicted` with relevance taken from `actual`; the ideal DCG
/// runs over the top `k` of the whole actual list.
pub fn ndcg_at_k(predicted: &RankedList, actual: &RankedList, k: usize) -> Result<f64, EvalError> {
    if k == 0 || k > predicted.len() {
        return Err(EvalError::KTooLarge {
            k,
            len: predicted.len(),
        });
    }
    let ranks = actual.ranks();
    let n = actual.len();
    let rel = predicted
        .top(k)
        .iter()
        .map(|id| {
            ranks
                .get(id.as_str())
                .map(|&r| rel_of_rank(r, n))
                .ok_or_else(|| EvalError::UnknownItem(id.clone()))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let ideal: Vec<f64> = (1..=k.min(n)).map(|r| rel_of_rank(r, n)).collect();
    Ok(dcg(&rel, k) / dcg(&ideal, k))
}

/// `(k - |top_k(a) ∩ top_k(b)|) / k`.
pub fn nsd_at_k(a: &RankedList, b: &RankedList, k: usize) -> Result<f64, EvalError> {
    let len = a.len().min(b.len());
    if k == 0 || k > len {
        return Err(EvalError::KTooLarge { k, len });
    }
    let top_a: HashSet<&str> = a.top(k).iter().map(String::as_str).collect();
    let overlap = b.top(k).iter().filter(|id| top_a.contains(id.as_str())).count();
    Ok((k - overlap) as f64 / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ndcg,
    Nsd,
}

/// Mean of `f` over `n_repeats` uniform permutations of `0..n`.
pub fn mean_over_shuffles(n: usize, n_repeats: usize, seed: u64, mut f: impl FnMut(&[usize]) -> f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for _ in 0..n_repeats {
        perm.sort_unstable();
        perm.shuffle(&mut rng);
        total += f(&perm);
    }
    total / n_repeats.max(1) as f64
}

/// Mean metric of uniformly shuffled orderings of `actual` against it.
pub fn random_baseline(
    actual: &RankedList,
    k: usize,
    metric: Metric,
    n_repeats: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    if k == 0 || k > actual.len() {
        return Err(EvalError::KTooLarge { k, len: actual.len() });
    }
    let mut err = None;
    let mean = mean_over_shuffles(actual.len(), n_repeats, seed, |perm| {
        let shuffled = RankedList {
            ids: perm.iter().map(|&i| actual.ids[i].clone()).collect(),
            scores: None,
        };
        let r = match metric {
            Metric::Ndcg => ndcg_at_k(&shuffled, actual, k),
            Metric::Nsd => nsd_at_k(&shuffled, actual, k),
        };
        r.unwrap_or_else(|e| {
            err = Some(e);
            f64::NAN
        })
    });
    match err {
        Some(e) => Err(e),
        None => Ok(mean),
    }
}
