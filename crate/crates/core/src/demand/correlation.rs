//! Do map queries predict store visits?

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::geo::{haversine_m, GeoPoint};
use crate::ingest::{local_day, Poi, QueryRecord, WifiRecord, DEFAULT_TZ_OFFSET_S, SECONDS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationParams {
    /// Attribution window after a query, days.
    pub window_days: f64,
    /// A visit within this distance of the queried destination counts.
    pub match_radius_m: f64,
    pub tz_offset_s: i64,
}

impl Default for CorrelationParams {
    fn default() -> Self {
        CorrelationParams {
            window_days: 1.5,
            match_radius_m: 1000.0,
            tz_offset_s: DEFAULT_TZ_OFFSET_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Local day index of the first series entry.
    pub first_day: i64,
    /// Daily destination queries, scaled so the busiest day is 1.
    pub query_series: Vec<f64>,
    /// Daily deduplicated visits at the queried destinations, same scaling.
    pub visit_series: Vec<f64>,
    /// Squared Pearson correlation; absent with fewer than two days or a
    /// constant series.
    pub r2: Option<f64>,
    pub queries: usize,
    /// Queries followed by a nearby visit of the same user in the window.
    pub attributed: usize,
    pub visited_fraction: f64,
}

/// Squared Pearson correlation of two equal-length series.
pub fn r_squared(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab * sab / (saa * sbb)).min(1.0))
}

fn scaled(counts: Vec<u64>) -> Vec<f64> {
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    counts.into_iter().map(|c| c as f64 / max).collect()
}

pub fn query_visit_correlation(
    queries: &[QueryRecord],
    wifi: &[WifiRecord],
    pois: &[Poi],
    params: &CorrelationParams,
) -> CorrelationReport {
    let location: HashMap<&str, GeoPoint> = pois.iter().map(|p| (p.id.as_str(), p.location)).collect();
    let routed: Vec<(&QueryRecord, GeoPoint)> = queries
        .iter()
        .filter_map(|q| {
            let dest = location.get(q.target_poi_id.as_deref()?)?;
            Some((q, *dest))
        })
        .collect();
    let tz = params.tz_offset_s;
    let days: Vec<i64> = routed.iter().map(|(q, _)| local_day(q.timestamp, tz)).collect();
    let (Some(&first), Some(&last)) = (days.iter().min(), days.iter().max()) else {
        return CorrelationReport {
            first_day: 0,
            query_series: Vec::new(),
            visit_series: Vec::new(),
            r2: None,
            queries: 0,
            attributed: 0,
            visited_fraction: 0.0,
        };
    };
    let span = (last - first + 1) as usize;

    let mut query_counts = vec![0u64; span];
    for d in &days {
        query_counts[(d - first) as usize] += 1;
    }

    let destinations: HashSet<&str> = routed.iter().filter_map(|(q, _)| q.target_poi_id.as_deref()).collect();
    let mut seen = HashSet::new();
    let mut visit_counts = vec![0u64; span];
    for w in wifi {
        if !destinations.contains(w.poi_id.as_str()) {
            continue;
        }
        let d = local_day(w.timestamp, tz);
        if (first..=last).contains(&d) && seen.insert((w.user_id.as_str(), w.poi_id.as_str(), d)) {
            visit_counts[(d - first) as usize] += 1;
        }
    }

    let mut trace: HashMap<&str, Vec<(i64, GeoPoint)>> = HashMap::new();
    for w in wifi {
        if let Some(loc) = location.get(w.poi_id.as_str()) {
            trace.entry(w.user_id.as_str()).or_default().push((w.timestamp, *loc));
        }
    }
    for t in trace.values_mut() {
        t.sort_by_key(|(ts, _)| *ts);
    }
    let window_s = (params.window_days * SECONDS_PER_DAY as f64).round() as i64;
    let attributed = routed
        .iter()
        .filter(|(q, dest)| {
            trace.get(q.user_id.as_str()).is_some_and(|t| {
                let start = t.partition_point(|(ts, _)| *ts < q.timestamp);
                t[start..]
                    .iter()
                    .take_while(|(ts, _)| *ts <= q.timestamp + window_s)
                    .any(|(_, loc)| haversine_m(*loc, *dest) < params.match_radius_m)
            })
        })
        .count();

    let query_series = scaled(query_counts);
    let visit_series = scaled(visit_counts);
    CorrelationReport {
        first_day: first,
        r2: r_squared(&query_series, &visit_series),
        query_series,
        visit_series,
        queries: routed.len(),
        attributed,
        visited_fraction: attributed as f64 / routed.len() as f64,
    }
}
