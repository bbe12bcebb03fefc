//! Seven-dimensional location features computed over the disc around a
//! location.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::geo::{haversine_m, Disc, GeoError, GeoPoint, SpatialIndex};
use crate::ingest::{Poi, VisitTable};

pub const FEATURE_COUNT: usize = 7;

/// Column names, in the order of [`FeatureVector::to_array`].
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "dist_center_m",
    "traffic_stations",
    "poi_density",
    "area_cat_popularity",
    "competition",
    "area_popularity",
    "estate_price",
];

/// Area category reported for a disc without POIs.
pub const NO_CATEGORY: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dist_center_m: f64,
    pub traffic_stations: f64,
    pub poi_density: f64,
    pub area_cat_popularity: f64,
    pub competition: f64,
    pub area_popularity: f64,
    pub estate_price: f64,
    /// No priced estate within range; `estate_price` is then 0.
    #[serde(skip)]
    pub estate_price_missing: bool,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.dist_center_m,
            self.traffic_stations,
            self.poi_density,
            self.area_cat_popularity,
            self.competition,
            self.area_popularity,
            self.estate_price,
        ]
    }

    pub fn from_array(v: [f64; FEATURE_COUNT]) -> Self {
        FeatureVector {
            dist_center_m: v[0],
            traffic_stations: v[1],
            poi_density: v[2],
            area_cat_popularity: v[3],
            competition: v[4],
            area_popularity: v[5],
            estate_price: v[6],
            estate_price_missing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub city_center: GeoPoint,
    pub radius_m: f64,
    pub target_category: String,
    pub transport_categories: BTreeSet<String>,
    pub estate_categories: BTreeSet<String>,
    pub estate_k: usize,
    pub estate_radius_m: f64,
}

impl FeatureConfig {
    /// Defaults: 1 km disc, 5 nearest estates within 2 km, Beijing center.
    pub fn new(target_category: &str) -> Self {
        FeatureConfig {
            city_center: GeoPoint {
                lat: 39.912,
                lng: 116.404,
            },
            radius_m: 1000.0,
            target_category: target_category.to_string(),
            transport_categories: ["bus-station", "subway-station", "transport"]
                .into_iter()
                .map(String::from)
                .collect(),
            estate_categories: ["real-estate"].into_iter().map(String::from).collect(),
            estate_k: 5,
            estate_radius_m: 2000.0,
        }
    }

    pub fn with_city_center(mut self, center: GeoPoint) -> Self {
        self.city_center = center;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstatePrice {
    pub value: f64,
    pub missing: bool,
}

/// Immutable feature-evaluation context for one target category.
#[derive(Debug, Clone)]
pub struct FeatureContext {
    config: FeatureConfig,
    pois: Vec<Poi>,
    visits: Vec<u64>,
    id_to_idx: HashMap<String, usize>,
    index: SpatialIndex,
    estate_index: SpatialIndex,
    is_transport: Vec<bool>,
    is_target: Vec<bool>,
    /// AC(p.l) -> (sum W, count) over target-category POIs p.
    area_cat_stats: BTreeMap<String, (f64, usize)>,
}

impl FeatureContext {
    pub fn new(pois: &[Poi], visits: &VisitTable, config: FeatureConfig) -> Result<Self, GeoError> {
        if !(config.radius_m > 0.0) || !config.radius_m.is_finite() {
            return Err(GeoError::InvalidRadius(config.radius_m));
        }
        let pois = pois.to_vec();
        let items: Vec<(usize, GeoPoint)> = pois.iter().map(|p| p.location).enumerate().collect();
        let index = SpatialIndex::build(&items, config.radius_m)?;
        let estates: Vec<(usize, GeoPoint)> = pois
            .iter()
            .enumerate()
            .filter(|(_, p)| p.unit_price.is_some() && config.estate_categories.iter().any(|c| p.in_category(c)))
            .map(|(i, p)| (i, p.location))
            .collect();
        let estate_index = SpatialIndex::build(&estates, config.estate_radius_m.max(1.0))?;
        let is_transport = pois
            .iter()
            .map(|p| config.transport_categories.iter().any(|c| p.in_category(c)))
            .collect();
        let is_target: Vec<bool> = pois.iter().map(|p| p.in_category(&config.target_category)).collect();
        let visits: Vec<u64> = pois.iter().map(|p| visits.count(&p.id)).collect();
        let id_to_idx = pois.iter().enumerate().map(|(i, p)| (p.id.clone(), i)).collect();
        let mut ctx = FeatureContext {
            config,
            pois,
            visits,
            id_to_idx,
            index,
            estate_index,
            is_transport,
            is_target,
            area_cat_stats: BTreeMap::new(),
        };
        let mut stats: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for i in 0..ctx.pois.len() {
            if ctx.is_target[i] {
                let ac = ctx.area_category(ctx.pois[i].location);
                let e = stats.entry(ac).or_insert((0.0, 0));
                e.0 += ctx.visits[i] as f64;
                e.1 += 1;
            }
        }
        ctx.area_cat_stats = stats;
        Ok(ctx)
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn pois(&self) -> &[Poi] {
        &self.pois
    }

    pub fn visits_of(&self, poi_id: &str) -> u64 {
        self.id_to_idx.get(poi_id).map_or(0, |&i| self.visits[i])
    }

    fn members(&self, l: GeoPoint) -> Vec<usize> {
        self.index.query_disc(&Disc {
            center: l,
            radius_m: self.config.radius_m,
        })
    }

    pub fn f_dist_center(&self, l: GeoPoint) -> f64 {
        haversine_m(l, self.config.city_center)
    }

    pub fn f_traffic(&self, l: GeoPoint) -> f64 {
        self.members(l).into_iter().filter(|&i| self.is_transport[i]).count() as f64
    }

    pub fn f_density(&self, l: GeoPoint) -> f64 {
        self.members(l).len() as f64
    }

    pub fn area_category(&self, l: GeoPoint) -> String {
        self.area_category_of(&self.members(l))
    }

    fn area_category_of(&self, members: &[usize]) -> String {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in members {
            *counts.entry(self.pois[i].category_l1.as_str()).or_default() += 1;
        }
        let mut best: Option<(&str, usize)> = None;
        for (cat, n) in counts {
            if best.is_none_or(|(_, m)| n > m) {
                best = Some((cat, n));
            }
        }
        best.map_or_else(|| NO_CATEGORY.to_string(), |(c, _)| c.to_string())
    }

    pub fn f_area_cat_popularity(&self, l: GeoPoint) -> f64 {
        self.area_cat_popularity_for(&self.area_category(l))
    }

    fn area_cat_popularity_for(&self, area_category: &str) -> f64 {
        match self.area_cat_stats.get(area_category) {
            Some(&(sum, n)) if n > 0 => sum / n as f64,
            _ => 0.0,
        }
    }

    pub fn f_competition(&self, l: GeoPoint) -> f64 {
        self.competition_of(&self.members(l))
    }

    fn competition_of(&self, members: &[usize]) -> f64 {
        if members.is_empty() {
            return 0.0;
        }
        let nc = members.iter().filter(|&&i| self.is_target[i]).count();
        nc as f64 / members.len() as f64
    }

    pub fn f_area_popularity(&self, l: GeoPoint, exclude_poi: Option<&str>) -> f64 {
        self.area_popularity_of(&self.members(l), exclude_poi)
    }

    fn area_popularity_of(&self, members: &[usize], exclude_poi: Option<&str>) -> f64 {
        let excluded = exclude_poi.and_then(|id| self.id_to_idx.get(id).copied());
        members
            .iter()
            .filter(|&&i| Some(i) != excluded)
            .map(|&i| self.visits[i])
            .sum::<u64>() as f64
    }

    pub fn f_estate_price(&self, l: GeoPoint) -> EstatePrice {
        let near = self
            .estate_index
            .k_nearest(l, self.config.estate_k, self.config.estate_radius_m);
        if near.is_empty() {
            return EstatePrice {
                value: 0.0,
                missing: true,
            };
        }
        let sum: f64 = near.iter().map(|&(i, _)| self.pois[i].unit_price.unwrap_or(0.0)).sum();
        EstatePrice {
            value: sum / near.len() as f64,
            missing: false,
        }
    }

    /// All seven features at `l`. `exclude_poi` removes that POI's own
    /// visits from the area popularity.
    pub fn feature_vector(&self, l: GeoPoint, exclude_poi: Option<&str>) -> FeatureVector {
        let members = self.members(l);
        let traffic = members.iter().filter(|&&i| self.is_transport[i]).count();
        let estate = self.f_estate_price(l);
        FeatureVector {
            dist_center_m: self.f_dist_center(l),
            traffic_stations: traffic as f64,
            poi_density: members.len() as f64,
            area_cat_popularity: self.area_cat_popularity_for(&self.area_category_of(&members)),
            competition: self.competition_of(&members),
            area_popularity: self.area_popularity_of(&members, exclude_poi),
            estate_price: estate.value,
            estate_price_missing: estate.missing,
        }
    }

    /// Features of an existing POI with its own visits excluded.
    pub fn poi_features(&self, poi_id: &str) -> Option<FeatureVector> {
        let &i = self.id_to_idx.get(poi_id)?;
        Some(self.feature_vector(self.pois[i].location, Some(poi_id)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CENTER: GeoPoint = GeoPoint {
        lat: 39.912,
        lng: 116.404,
    };

    /// Point `north_m` meters north of CENTER (pure latitude shift).
    fn north(north_m: f64) -> GeoPoint {
        GeoPoint {
            lat: CENTER.lat + (north_m / crate::geo::EARTH_RADIUS_M).to_degrees(),
            lng: CENTER.lng,
        }
    }

    fn poi(id: &str, at: GeoPoint, l1: &str, l2: &str) -> Poi {
        Poi {
            id: id.into(),
            name: id.into(),
            location: at,
            category_l1: l1.into(),
            category_l2: l2.into(),
            brand: None,
            unit_price: None,
        }
    }

    fn estate(id: &str, at: GeoPoint, price: f64) -> Poi {
        Poi {
            unit_price: Some(price),
            ..poi(id, at, "residence", "real-estate")
        }
    }

    fn ctx(pois: &[Poi], visits: &[(&str, u64)]) -> FeatureContext {
        let table = visits.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        FeatureContext::new(pois, &table, FeatureConfig::new("coffee-shop").with_city_center(CENTER)).unwrap()
    }

    #[test]
    fn empty_city_is_zero_except_distance() {
        let c = ctx(&[], &[]);
        let l = north(2500.0);
        let f = c.feature_vector(l, None);
        assert!((f.dist_center_m - 2500.0).abs() < 1e-6);
        assert_eq!(&f.to_array()[1..], &[0.0; 6]);
        assert!(f.estate_price_missing);
        assert_eq!(c.area_category(l), NO_CATEGORY);
        assert_eq!(c.f_dist_center(CENTER), 0.0);
    }

    #[test]
    fn traffic_counts_only_in_disc_stations() {
        let pois = vec![
            poi("b1", north(100.0), "transport", "bus-station"),
            poi("b2", north(500.0), "transport", "bus-station"),
            poi("s1", north(900.0), "transport", "subway-station"),
            poi("b3", north(1100.0), "transport", "bus-station"),
            poi("b4", north(3000.0), "transport", "bus-station"),
        ];
        assert_eq!(ctx(&pois, &[]).f_traffic(CENTER), 3.0);
    }

    #[test]
    fn density_competition_and_area_category() {
        let mut pois = Vec::new();
        for i in 0..3 {
            pois.push(poi(&format!("h{i}"), north(100.0 * i as f64), "hotel", "express-inn"));
            pois.push(poi(
                &format!("o{i}"),
                north(-100.0 * i as f64 - 50.0),
                "office",
                "office",
            ));
        }
        pois.push(poi("c0", north(10.0), "food", "coffee-shop"));
        pois.push(poi("far", north(5000.0), "food", "coffee-shop"));
        let c = ctx(&pois, &[]);
        assert_eq!(c.f_density(CENTER), 7.0);
        // 3 hotel / 3 office / 1 food: lexicographically smallest of the tied modes
        assert_eq!(c.area_category(CENTER), "hotel");
        assert!((c.f_competition(CENTER) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn competition_three_of_twelve() {
        let mut pois = Vec::new();
        for i in 0..12 {
            let (l1, l2) = if i < 3 {
                ("food", "coffee-shop")
            } else {
                ("shopping", "mall")
            };
            pois.push(poi(&format!("p{i}"), north(50.0 * i as f64), l1, l2));
        }
        assert_eq!(ctx(&pois, &[]).f_competition(CENTER), 0.25);
    }

    #[test]
    fn area_popularity_with_exclusion() {
        let pois = vec![
            poi("a", north(10.0), "food", "coffee-shop"),
            poi("b", north(20.0), "food", "coffee-shop"),
        ];
        let c = ctx(&pois, &[("a", 5), ("b", 7)]);
        assert_eq!(c.f_area_popularity(CENTER, None), 12.0);
        assert_eq!(c.f_area_popularity(CENTER, Some("b")), 5.0);
        assert_eq!(c.f_area_popularity(north(9000.0), None), 0.0);
    }

    #[test]
    fn area_cat_popularity_is_mean_over_matching_target_pois() {
        let pois = vec![
            poi("a", north(0.0), "food", "coffee-shop"),
            poi("b", north(30.0), "food", "coffee-shop"),
            poi("x", north(20_000.0), "food", "coffee-shop"),
            poi("h1", north(20_010.0), "hotel", "inn"),
            poi("h2", north(20_020.0), "hotel", "inn"),
        ];
        let c = ctx(&pois, &[("a", 4), ("b", 8), ("x", 100)]);
        // AC around a/b is "food"; x sits in a hotel area
        assert_eq!(c.f_area_cat_popularity(CENTER), 6.0);
        assert_eq!(c.f_area_cat_popularity(north(20_015.0)), 100.0);

        let single = ctx(&pois[..1], &[("a", 10)]);
        assert_eq!(single.f_area_cat_popularity(CENTER), 10.0);
    }

    #[test]
    fn estate_price_nearest_five_within_two_km() {
        let pois: Vec<_> = (1..=5)
            .map(|i| estate(&format!("e{i}"), north(100.0 * i as f64), i as f64))
            .chain([
                estate("far", north(2500.0), 1000.0),
                estate("sixth", north(1900.0), 500.0),
            ])
            .collect();
        let p = ctx(&pois, &[]).f_estate_price(CENTER);
        assert_eq!(p.value, 3.0);
        assert!(!p.missing);

        let two = vec![estate("e1", north(100.0), 10.0), estate("e2", north(300.0), 20.0)];
        assert_eq!(ctx(&two, &[]).f_estate_price(CENTER).value, 15.0);
    }

    #[test]
    fn dist_center_decreases_towards_center() {
        let c = ctx(&[], &[]);
        let d: Vec<f64> = [4000.0, 3000.0, 2000.0, 1000.0, 0.0]
            .iter()
            .map(|&m| c.f_dist_center(north(m)))
            .collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn input_order_does_not_matter() {
        let mut pois = vec![
            poi("a", north(10.0), "food", "coffee-shop"),
            poi("b", north(200.0), "hotel", "inn"),
            poi("t", north(300.0), "transport", "bus-station"),
            estate("e", north(400.0), 9000.0),
        ];
        let visits = [("a", 3), ("b", 9)];
        let f1 = ctx(&pois, &visits).feature_vector(north(50.0), Some("a"));
        pois.reverse();
        let f2 = ctx(&pois, &visits).feature_vector(north(50.0), Some("a"));
        assert_eq!(f1, f2);
    }
}
