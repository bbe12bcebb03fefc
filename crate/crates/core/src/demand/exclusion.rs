//! Removing demand that existing stores already serve.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DemandError, DemandPoint};
use crate::geo::{Disc, GeoError, GeoPoint, SpatialIndex};
use crate::scalar::Scalar;

/// `S_d = 1 - exp(-d^2 / sigma^2)`: grows from 0 at a store to 1 far away.
pub fn distance_score<T: Scalar>(d: T, sigma: T) -> T {
    T::one() - (-(d * d) / (sigma * sigma)).exp()
}

/// `S_s = exp(-eps * N)` for `N` stores nearby.
pub fn supply_score<T: Scalar>(n: usize, epsilon: T) -> T {
    (-epsilon * T::of_usize(n)).exp()
}

/// `S_r = alpha * S_d + (1 - alpha) * S_s`.
pub fn retention_score<T: Scalar>(d: T, n: usize, sigma: T, epsilon: T, alpha: T) -> T {
    alpha * distance_score(d, sigma) + (T::one() - alpha) * supply_score(n, epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ExclusionMode {
    Probabilistic,
    /// Retain iff `S_r >= theta`.
    Threshold {
        theta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExclusionParams {
    pub sigma_m: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub percentile: f64,
    pub supply_count_radius_m: f64,
    pub mode: ExclusionMode,
    /// Weight gap points by their retention score when clustering.
    pub weight_by_score: bool,
    /// Threshold used when no source-destination distances are available.
    pub fallback_radius_m: f64,
}

impl Default for ExclusionParams {
    fn default() -> Self {
        ExclusionParams {
            sigma_m: 300.0,
            epsilon: 0.5,
            alpha: 0.7,
            percentile: 0.8,
            supply_count_radius_m: 1000.0,
            mode: ExclusionMode::Probabilistic,
            weight_by_score: false,
            fallback_radius_m: 2000.0,
        }
    }
}

impl ExclusionParams {
    pub fn validate(&self) -> Result<(), DemandError> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(DemandError::InvalidParam { name, value: v })
            }
        };
        positive("sigma_m", self.sigma_m)?;
        positive("supply_count_radius_m", self.supply_count_radius_m)?;
        positive("fallback_radius_m", self.fallback_radius_m)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(DemandError::InvalidParam {
                name: "epsilon",
                value: self.epsilon,
            });
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(DemandError::InvalidParam {
                name: "alpha",
                value: self.alpha,
            });
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return Err(DemandError::InvalidParam {
                name: "percentile",
                value: self.percentile,
            });
        }
        if let ExclusionMode::Threshold { theta } = self.mode {
            if !theta.is_finite() {
                return Err(DemandError::InvalidParam {
                    name: "theta",
                    value: theta,
                });
            }
        }
        Ok(())
    }
}

/// Existing stores of the target, indexed for nearest and count queries.
#[derive(Debug, Clone)]
pub struct StoreLayer {
    index: SpatialIndex,
}

impl StoreLayer {
    pub fn new(stores: &[GeoPoint], cell_size_m: f64) -> Result<Self, GeoError> {
        Ok(StoreLayer {
            index: SpatialIndex::from_points(stores, cell_size_m)?,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn nearest_m(&self, p: GeoPoint) -> Option<f64> {
        self.index.nearest(p).map(|(_, d)| d)
    }

    pub fn count_within(&self, p: GeoPoint, radius_m: f64) -> usize {
        self.index.query_disc(&Disc { center: p, radius_m }).len()
    }

    /// Retention score of a demand at `p`; 1 when there are no stores.
    pub fn retention(&self, p: GeoPoint, params: &ExclusionParams) -> f64 {
        match self.nearest_m(p) {
            None => 1.0,
            Some(d) => {
                let n = self.count_within(p, params.supply_count_radius_m);
                retention_score(d, n, params.sigma_m, params.epsilon, params.alpha)
            }
        }
    }
}

/// A demand point that survived exclusion, with its retention score.
#[derive(Debug, Clone, PartialEq)]
pub struct Retained {
    pub point: DemandPoint,
    pub score: f64,
}

/// Keeps points strictly farther than `threshold_m` from every store.
pub fn exclude_specific(points: &[DemandPoint], stores: &StoreLayer, threshold_m: f64) -> Vec<DemandPoint> {
    let disc = |p: &DemandPoint| Disc {
        center: p.location,
        radius_m: threshold_m,
    };
    let keep: Vec<bool> = points.par_iter().map(|p| !stores.index.any_within(&disc(p))).collect();
    points
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(p, _)| p.clone())
        .collect()
}

/// Uniform draw in [0, 1) for point `index`, independent of evaluation order.
pub fn point_draw(seed: u64, index: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(index as u128 * 2);
    rng.random::<f64>()
}

pub fn exclude_general(
    points: &[DemandPoint],
    stores: &StoreLayer,
    params: &ExclusionParams,
    seed: u64,
) -> Vec<Retained> {
    let verdicts: Vec<Option<f64>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let score = stores.retention(p.location, params);
            let keep = match params.mode {
                ExclusionMode::Probabilistic => point_draw(seed, i) < score,
                ExclusionMode::Threshold { theta } => score >= theta,
            };
            keep.then_some(score)
        })
        .collect();
    points
        .iter()
        .zip(verdicts)
        .filter_map(|(p, v)| {
            v.map(|score| Retained {
                point: p.clone(),
                score,
            })
        })
        .collect()
}
