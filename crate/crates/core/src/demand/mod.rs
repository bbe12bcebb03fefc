//! Demand mining: identify demand points in map queries, exclude the part
//! existing stores already supply, and cluster the remaining gap into
//! candidate locations.

mod correlation;
mod exclusion;
mod heatmap;
mod meanshift;
mod profile;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use correlation::{query_visit_correlation, r_squared, CorrelationParams, CorrelationReport};
pub use exclusion::{
    distance_score, exclude_general, exclude_specific, point_draw, retention_score, supply_score, ExclusionMode,
    ExclusionParams, Retained, StoreLayer,
};
pub use heatmap::{heatmap, HeatCell, MIN_CELL_M};
pub use meanshift::{cluster, meanshift, Clustering, DemandCenter, MeanShiftConfig};
pub use profile::{distance_cdf, effective_distance, temporal_profile, TemporalProfile};

use crate::geo::{GeoError, GeoPoint};
use crate::ingest::{normalize_keyword, CategoryAliases, Poi, QueryKind, QueryRecord, DEFAULT_TZ_OFFSET_S};

/// Brands with fewer destination trips than this borrow the category's
/// distance distribution.
pub const MIN_BRAND_TRIPS: usize = 50;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("invalid parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("no demand points to cluster")]
    NoPoints,
    #[error("distance distribution is empty")]
    EmptyDistribution,
    #[error("{weights} weights for {points} points")]
    WeightLength { points: usize, weights: usize },
    #[error("heatmap cell {0} m is below the {MIN_CELL_M} m minimum")]
    CellTooSmall(f64),
    #[error("unknown target {0:?}")]
    UnknownTarget(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// What a demand is for: a named brand (route queries) or a category
/// (nearby queries).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "lowercase")]
pub enum Target {
    Brand(String),
    Category(String),
}

impl Target {
    /// Interprets a bare name as a brand when some POI carries it, else as
    /// a category when some POI belongs to it.
    pub fn resolve(name: &str, pois: &[Poi]) -> Option<Target> {
        if pois.iter().any(|p| p.has_brand(name)) {
            Some(Target::Brand(name.to_string()))
        } else if pois.iter().any(|p| p.in_category(name)) {
            Some(Target::Category(name.to_string()))
        } else {
            None
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Target::Brand(s) | Target::Category(s) => s,
        }
    }

    /// Existing stores that supply this target.
    pub fn stores<'a>(&self, pois: &'a [Poi]) -> Vec<&'a Poi> {
        pois.iter()
            .filter(|p| match self {
                Target::Brand(b) => p.has_brand(b),
                Target::Category(c) => p.in_category(c),
            })
            .collect()
    }

    /// Category the target's stores belong to: the category itself, or the
    /// most common `category_l2` among the brand's stores.
    pub fn category(&self, pois: &[Poi]) -> Option<String> {
        match self {
            Target::Category(c) => Some(c.clone()),
            Target::Brand(_) => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for p in self.stores(pois) {
                    *counts.entry(p.category_l2.as_str()).or_default() += 1;
                }
                counts
                    .into_iter()
                    .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
                    .map(|(c, _)| c.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "lowercase")]
pub enum DemandKind {
    Specific(String),
    General(String),
}

/// One observed intent to visit a store, at the query origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandPoint {
    pub location: GeoPoint,
    pub timestamp: i64,
    pub kind: DemandKind,
}

/// Demand points for `target`, in query order. Specific demand comes from
/// route queries whose destination carries the brand (or whose keyword is
/// the brand); general demand from nearby queries whose keyword maps to the
/// category.
pub fn extract_demand(
    queries: &[QueryRecord],
    pois: &[Poi],
    target: &Target,
    aliases: &CategoryAliases,
) -> Vec<DemandPoint> {
    let by_id: HashMap<&str, &Poi> = pois.iter().map(|p| (p.id.as_str(), p)).collect();
    let points: Vec<DemandPoint> = match target {
        Target::Brand(brand) => {
            let norm = normalize_keyword(brand);
            queries
                .iter()
                .filter(|q| q.kind == QueryKind::Route)
                .filter(|q| {
                    let dest = q.target_poi_id.as_deref().and_then(|id| by_id.get(id));
                    dest.is_some_and(|p| p.has_brand(brand)) || normalize_keyword(&q.keyword) == norm
                })
                .map(|q| DemandPoint {
                    location: q.origin,
                    timestamp: q.timestamp,
                    kind: DemandKind::Specific(brand.clone()),
                })
                .collect()
        }
        Target::Category(category) => queries
            .iter()
            .filter(|q| q.kind == QueryKind::Nearby && aliases.matches(&q.keyword, category))
            .map(|q| DemandPoint {
                location: q.origin,
                timestamp: q.timestamp,
                kind: DemandKind::General(category.clone()),
            })
            .collect(),
    };
    if points.is_empty() {
        log::warn!("no demand points match target {:?}", target.name());
    }
    points
}

/// (origin, destination) of route queries whose destination satisfies `keep`.
pub fn trips(queries: &[QueryRecord], pois: &[Poi], keep: impl Fn(&Poi) -> bool) -> Vec<(GeoPoint, GeoPoint)> {
    let by_id: HashMap<&str, &Poi> = pois.iter().map(|p| (p.id.as_str(), p)).collect();
    queries
        .iter()
        .filter_map(|q| {
            let dest = by_id.get(q.target_poi_id.as_deref()?)?;
            keep(dest).then_some((q.origin, dest.location))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdSource {
    Brand,
    Category,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandOutcome {
    pub target: Target,
    pub demand_points: usize,
    pub gap_points: usize,
    pub threshold_m: f64,
    pub threshold_source: ThresholdSource,
    pub centers: Vec<DemandCenter>,
    pub profile: TemporalProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandConfig {
    pub exclusion: ExclusionParams,
    pub meanshift: MeanShiftConfig,
    pub tz_offset_s: i64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig {
            exclusion: ExclusionParams::default(),
            meanshift: MeanShiftConfig::default(),
            tz_offset_s: DEFAULT_TZ_OFFSET_S,
        }
    }
}

/// The three-step demand pipeline: identify, exclude supplied demand,
/// cluster the gap. The clustering bandwidth equals the effective-distance
/// threshold.
pub fn find_demand_centers(
    queries: &[QueryRecord],
    pois: &[Poi],
    target: &Target,
    aliases: &CategoryAliases,
    cfg: &DemandConfig,
    seed: u64,
) -> Result<DemandOutcome, DemandError> {
    let params = &cfg.exclusion;
    params.validate()?;
    let points = extract_demand(queries, pois, target, aliases);

    let category = target.category(pois);
    let category_trips = |c: &Option<String>| match c {
        Some(c) => trips(queries, pois, |p| p.in_category(c)),
        None => Vec::new(),
    };
    let (trip_set, mut source) = match target {
        Target::Brand(b) => {
            let own = trips(queries, pois, |p| p.has_brand(b));
            if own.len() >= MIN_BRAND_TRIPS {
                (own, ThresholdSource::Brand)
            } else {
                (category_trips(&category), ThresholdSource::Category)
            }
        }
        Target::Category(_) => (category_trips(&category), ThresholdSource::Category),
    };
    let profile = temporal_profile(&points, &trip_set, cfg.tz_offset_s);
    let threshold_m = match effective_distance(&profile.sd_distance_cdf, params.percentile) {
        Ok(d) if d > 0.0 => d,
        _ => {
            source = ThresholdSource::Fallback;
            params.fallback_radius_m
        }
    };

    let store_points: Vec<GeoPoint> = target.stores(pois).iter().map(|p| p.location).collect();
    let stores = StoreLayer::new(&store_points, params.supply_count_radius_m)?;
    let gap: Vec<Retained> = match target {
        Target::Brand(_) => exclude_specific(&points, &stores, threshold_m)
            .into_iter()
            .map(|p| Retained {
                score: stores.retention(p.location, params),
                point: p,
            })
            .collect(),
        Target::Category(_) => exclude_general(&points, &stores, params, seed),
    };

    let centers = if gap.is_empty() {
        Vec::new()
    } else {
        let locations: Vec<GeoPoint> = gap.iter().map(|r| r.point.location).collect();
        let scores: Vec<f64> = gap.iter().map(|r| r.score).collect();
        let weights = (params.weight_by_score && matches!(target, Target::Category(_))).then_some(scores.as_slice());
        let clustering = cluster(&locations, weights, threshold_m, &cfg.meanshift)?;
        let mut centers = clustering.centers;
        for c in &mut centers {
            c.weight = 0.0;
        }
        for (label, s) in clustering.labels.iter().zip(&scores) {
            centers[*label].weight += s;
        }
        centers
    };

    Ok(DemandOutcome {
        target: target.clone(),
        demand_points: points.len(),
        gap_points: gap.len(),
        threshold_m,
        threshold_source: source,
        centers,
        profile,
    })
}
