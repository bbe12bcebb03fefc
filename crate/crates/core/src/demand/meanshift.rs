//! Flat-kernel MeanShift over geographic points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DemandError;
use crate::geo::{haversine_m, Disc, GeoPoint, LocalProjection, SpatialIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftConfig {
    pub tol_m: f64,
    pub max_iter: usize,
}

impl Default for MeanShiftConfig {
    fn default() -> Self {
        MeanShiftConfig {
            tol_m: 1.0,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandCenter {
    #[serde(flatten)]
    pub location: GeoPoint,
    pub member_count: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centers: Vec<DemandCenter>,
    /// Index into `centers` for every input point.
    pub labels: Vec<usize>,
}

struct Kernel<'a> {
    points: &'a [GeoPoint],
    weights: Option<&'a [f64]>,
    index: SpatialIndex,
    proj: LocalProjection,
    bandwidth_m: f64,
}

impl Kernel<'_> {
    fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    fn neighbors(&self, at: GeoPoint) -> Vec<usize> {
        self.index.query_disc(&Disc {
            center: at,
            radius_m: self.bandwidth_m,
        })
    }

    /// Weighted planar mean of the points within the bandwidth of `at`.
    fn shifted(&self, at: GeoPoint) -> Option<GeoPoint> {
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for i in self.neighbors(at) {
            let w = self.weight(i);
            let (x, y) = self.proj.project(self.points[i]);
            sx += w * x;
            sy += w * y;
            sw += w;
        }
        (sw > 0.0).then(|| self.proj.unproject(sx / sw, sy / sw))
    }

    fn intensity(&self, at: GeoPoint) -> f64 {
        self.neighbors(at).into_iter().map(|i| self.weight(i)).sum()
    }

    fn converge(&self, seed: GeoPoint, cfg: &MeanShiftConfig) -> GeoPoint {
        let mut x = seed;
        for _ in 0..cfg.max_iter {
            let Some(next) = self.shifted(x) else { break };
            let shift = haversine_m(x, next);
            x = next;
            if shift < cfg.tol_m {
                break;
            }
        }
        x
    }
}

fn validate(points: &[GeoPoint], weights: Option<&[f64]>, bandwidth_m: f64) -> Result<(), DemandError> {
    if points.is_empty() {
        return Err(DemandError::NoPoints);
    }
    if !(bandwidth_m > 0.0 && bandwidth_m.is_finite()) {
        return Err(DemandError::InvalidParam {
            name: "bandwidth_m",
            value: bandwidth_m,
        });
    }
    if let Some(w) = weights {
        if w.len() != points.len() {
            return Err(DemandError::WeightLength {
                points: points.len(),
                weights: w.len(),
            });
        }
        if let Some(&bad) = w.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(DemandError::InvalidParam {
                name: "weight",
                value: bad,
            });
        }
    }
    Ok(())
}

/// Greedy suppression: modes sorted by intensity (desc, then lat, lng)
/// absorb every later mode within `radius_m`.
pub(crate) fn merge_modes(mut modes: Vec<(GeoPoint, f64)>, radius_m: f64) -> Vec<GeoPoint> {
    modes.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp_lat_lng(&b.0)));
    let mut kept: Vec<GeoPoint> = Vec::new();
    for (m, _) in modes {
        if kept.iter().all(|k| haversine_m(*k, m) > radius_m) {
            kept.push(m);
        }
    }
    kept
}

/// Assigns every point to its nearest center (ties to the earlier center),
/// drops empty centers and orders them by member count desc, then lat, lng.
pub(crate) fn assign(points: &[GeoPoint], weights: Option<&[f64]>, modes: &[GeoPoint]) -> Clustering {
    let raw: Vec<usize> = points
        .par_iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, m) in modes.iter().enumerate() {
                let d = haversine_m(*p, *m);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    let mut counts = vec![0usize; modes.len()];
    let mut mass = vec![0.0; modes.len()];
    for (i, &c) in raw.iter().enumerate() {
        counts[c] += 1;
        mass[c] += weights.map_or(1.0, |w| w[i]);
    }
    let mut order: Vec<usize> = (0..modes.len()).filter(|&c| counts[c] > 0).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then_with(|| modes[a].cmp_lat_lng(&modes[b])));
    let mut remap = vec![usize::MAX; modes.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    Clustering {
        centers: order
            .iter()
            .map(|&c| DemandCenter {
                location: modes[c],
                member_count: counts[c],
                weight: mass[c],
            })
            .collect(),
        labels: raw.into_iter().map(|c| remap[c]).collect(),
    }
}

/// MeanShift seeded at every point, returning centers and point labels.
/// `weight` of a center is the summed weight of its members (count when
/// unweighted).
pub fn cluster(
    points: &[GeoPoint],
    weights: Option<&[f64]>,
    bandwidth_m: f64,
    cfg: &MeanShiftConfig,
) -> Result<Clustering, DemandError> {
    validate(points, weights, bandwidth_m)?;
    let kernel = Kernel {
        points,
        weights,
        index: SpatialIndex::from_points(points, bandwidth_m)?,
        proj: LocalProjection::fit(points).expect("non-empty"),
        bandwidth_m,
    };
    let modes: Vec<(GeoPoint, f64)> = points
        .par_iter()
        .map(|&seed| {
            let m = kernel.converge(seed, cfg);
            (m, kernel.intensity(m))
        })
        .collect();
    let merged = merge_modes(modes, bandwidth_m / 2.0);
    Ok(assign(points, weights, &merged))
}

pub fn meanshift(
    points: &[GeoPoint],
    weights: Option<&[f64]>,
    bandwidth_m: f64,
    cfg: &MeanShiftConfig,
) -> Result<Vec<DemandCenter>, DemandError> {
    cluster(points, weights, bandwidth_m, cfg).map(|c| c.centers)
}
