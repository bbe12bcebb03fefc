//! When demand appears and how far users travel to satisfy it.

use serde::{Deserialize, Serialize};

use super::{DemandError, DemandPoint};
use crate::geo::{haversine_m, GeoPoint};
use crate::ingest::{local_day, SECONDS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    pub hour_hist: [u64; 24],
    /// Monday first.
    pub weekday_hist: [u64; 7],
    /// `(distance_m, cumulative fraction)` at each distinct distance.
    pub sd_distance_cdf: Vec<(f64, f64)>,
}

/// Monday = 0 for a local day index counted from 1970-01-01 (a Thursday).
fn weekday(day: i64) -> usize {
    (day + 3).rem_euclid(7) as usize
}

/// Empirical step CDF of `distances`, one entry per distinct value.
pub fn distance_cdf(mut distances: Vec<f64>) -> Vec<(f64, f64)> {
    distances.retain(|d| d.is_finite());
    distances.sort_by(f64::total_cmp);
    let n = distances.len() as f64;
    let mut cdf: Vec<(f64, f64)> = Vec::new();
    for (i, d) in distances.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match cdf.last_mut() {
            Some(last) if last.0 == *d => last.1 = frac,
            _ => cdf.push((*d, frac)),
        }
    }
    cdf
}

/// Hour and weekday histograms of `points` plus the source-destination
/// distance CDF over `trips` (origin, destination).
pub fn temporal_profile(points: &[DemandPoint], trips: &[(GeoPoint, GeoPoint)], tz_offset_s: i64) -> TemporalProfile {
    let mut hour_hist = [0; 24];
    let mut weekday_hist = [0; 7];
    for p in points {
        let local = p.timestamp + tz_offset_s;
        hour_hist[(local.rem_euclid(SECONDS_PER_DAY) / 3600) as usize] += 1;
        weekday_hist[weekday(local_day(p.timestamp, tz_offset_s))] += 1;
    }
    let distances = trips.iter().map(|&(o, d)| haversine_m(o, d)).collect();
    TemporalProfile {
        hour_hist,
        weekday_hist,
        sd_distance_cdf: distance_cdf(distances),
    }
}

/// Smallest recorded distance whose cumulative fraction reaches `percentile`.
pub fn effective_distance(cdf: &[(f64, f64)], percentile: f64) -> Result<f64, DemandError> {
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(DemandError::InvalidParam {
            name: "percentile",
            value: percentile,
        });
    }
    cdf.iter()
        .find(|(_, f)| *f >= percentile - 1e-12)
        .or(cdf.last())
        .map(|&(d, _)| d)
        .ok_or(DemandError::EmptyDistribution)
}
