//! Seeded synthetic city with planted ground truth.
//!
//! The generator lays out background POIs, a target category with named
//! brands, Gaussian demand hotspots that emit map queries, and WiFi visit
//! logs whose per-POI customer counts are Poisson draws around a planted
//! mean. The planted mean is a fixed log-linear function of the location
//! features evaluated on the background layer, so the true ranking is
//! known by construction and recorded in the manifest.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    anonymize, CategoryAliases, IngestError, Poi, QueryKind, QueryRecord, VisitTable, WifiRecord, SECONDS_PER_DAY,
};
use crate::features::{FeatureConfig, FeatureContext, FeatureVector, FEATURE_COUNT};
use crate::geo::{haversine_m, GeoPoint, LocalProjection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CityConfig {
    pub seed: u64,
    pub center: GeoPoint,
    /// Half side of the square city extent, meters.
    pub half_extent_m: f64,
    pub days: u32,
    /// Local midnight of the first simulated day.
    pub start_ts: i64,
    pub tz_offset_s: i64,
    pub n_users: usize,
    pub salt: String,
    /// Fraction of background POIs drawn from a Gaussian around the center
    /// rather than uniformly over the extent.
    pub center_concentration: f64,
    pub center_spread_m: f64,
    pub categories: Vec<CategorySpec>,
    pub target: TargetSpec,
    pub hotspots: Vec<HotspotSpec>,
    /// Route queries per existing brand store per day, issued from around
    /// that store (demand the store already serves).
    pub served_daily_rate: f64,
    pub served_spread_m: f64,
    /// Off-target "nearby" queries per day, uniform over the city.
    pub noise_queries_per_day: f64,
    pub signal: SignalSpec,
    /// Mean customer count of a background (non-target) POI.
    pub background_visits_mean: f64,
    /// Probability that a route query is followed by a visit to its
    /// destination by the same user.
    pub conversion_rate: f64,
    /// When set, destination visits are drawn independently of the query
    /// stream (flat daily rate) instead of by conversion.
    pub independent_visits: bool,
    /// Relative amplitude of the shared day-to-day demand cycle.
    pub seasonality: f64,
    /// Local hours around which query times concentrate; empty = uniform.
    pub hour_peaks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub category_l1: String,
    pub category_l2: String,
    pub count: usize,
    /// Unit price at the city center; prices decay with distance.
    #[serde(default)]
    pub center_price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub category_l1: String,
    pub category_l2: String,
    /// Keyword used by "nearby" queries for this category.
    pub keyword: String,
    pub unbranded: usize,
    pub brands: Vec<BrandSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrandSpec {
    pub name: String,
    pub count: usize,
    /// Confine the brand's stores to a Gaussian cluster instead of the
    /// general POI layout.
    #[serde(default)]
    pub cluster: Option<ClusterSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub center: GeoPoint,
    pub spread_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotSpec {
    pub center: GeoPoint,
    pub spread_m: f64,
    /// Mean number of queries per day.
    pub daily_rate: f64,
    pub kind: QueryKind,
    /// Brand routed to by `route` hotspots.
    #[serde(default)]
    pub brand: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    /// Planted mean at the average feature vector.
    pub base: f64,
    /// Log-linear weights on the standardized features, in feature order.
    pub weights: [f64; FEATURE_COUNT],
}

impl Default for SignalSpec {
    fn default() -> Self {
        SignalSpec {
            base: 300.0,
            weights: [-0.5, 0.3, 0.25, 0.0, -0.35, 0.45, 0.3],
        }
    }
}

fn offset(center: GeoPoint, east_m: f64, north_m: f64) -> GeoPoint {
    LocalProjection::new(center).unproject(east_m, north_m)
}

impl Default for CityConfig {
    fn default() -> Self {
        let center = GeoPoint {
            lat: 39.912,
            lng: 116.404,
        };
        let cat = |l1: &str, l2: &str, count: usize, price: Option<f64>| CategorySpec {
            category_l1: l1.into(),
            category_l2: l2.into(),
            count,
            center_price: price,
        };
        CityConfig {
            seed: 42,
            center,
            half_extent_m: 12_000.0,
            days: 30,
            // 2015-06-01 00:00 at UTC+8
            start_ts: 1_433_088_000,
            tz_offset_s: super::DEFAULT_TZ_OFFSET_S,
            n_users: 20_000,
            salt: "synthetic-city".into(),
            center_concentration: 0.5,
            center_spread_m: 5_000.0,
            categories: vec![
                cat("hotel", "express-inn", 150, None),
                cat("office", "office-building", 250, None),
                cat("shopping", "mall", 120, None),
                cat("food", "restaurant", 300, None),
                cat("transport", "bus-station", 220, None),
                cat("transport", "subway-station", 40, None),
                cat("residence", "real-estate", 150, Some(80_000.0)),
            ],
            target: TargetSpec {
                category_l1: "food".into(),
                category_l2: "coffee-shop".into(),
                keyword: "coffee".into(),
                unbranded: 260,
                brands: vec![
                    BrandSpec {
                        name: "Starbucks".into(),
                        count: 40,
                        cluster: None,
                    },
                    BrandSpec {
                        name: "Costa".into(),
                        count: 25,
                        cluster: None,
                    },
                ],
            },
            hotspots: vec![
                HotspotSpec {
                    center: offset(center, -7_000.0, 6_000.0),
                    spread_m: 250.0,
                    daily_rate: 12.0,
                    kind: QueryKind::Nearby,
                    brand: None,
                },
                HotspotSpec {
                    center: offset(center, 6_500.0, -6_000.0),
                    spread_m: 250.0,
                    daily_rate: 10.0,
                    kind: QueryKind::Nearby,
                    brand: None,
                },
            ],
            served_daily_rate: 0.0,
            served_spread_m: 500.0,
            noise_queries_per_day: 20.0,
            signal: SignalSpec::default(),
            background_visits_mean: 40.0,
            conversion_rate: 0.0,
            independent_visits: false,
            seasonality: 0.3,
            hour_peaks: vec![12.0, 18.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotTruth {
    pub lat: f64,
    pub lng: f64,
    pub spread_m: f64,
    pub rate: f64,
    /// Planted mean customer count at the hotspot center.
    pub planted_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthManifest {
    pub hotspots: Vec<HotspotTruth>,
    /// Target-category POI ids by descending planted mean, ties by id.
    pub true_ranking: Vec<String>,
    pub planted_mean: BTreeMap<String, f64>,
    pub seed: u64,
    pub cfg: CityConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCity {
    pub queries: Vec<QueryRecord>,
    pub pois: Vec<Poi>,
    pub wifi: Vec<WifiRecord>,
    pub manifest: GroundTruthManifest,
}

impl CityConfig {
    /// The keyword of the target's nearby queries mapped to its category.
    pub fn aliases(&self) -> CategoryAliases {
        CategoryAliases::new().with(&self.target.keyword, &self.target.category_l2)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |msg: String| Err(IngestError::InvalidConfig(msg));
        if self.days == 0 {
            return bad("days must be at least 1".into());
        }
        if !(self.half_extent_m > 0.0) {
            return bad("half_extent_m must be positive".into());
        }
        if self.start_ts <= 0 {
            return bad("start_ts must be positive".into());
        }
        if self.salt.is_empty() {
            return bad("salt must be non-empty".into());
        }
        if !(0.0..=1.0).contains(&self.center_concentration) || !(0.0..=1.0).contains(&self.conversion_rate) {
            return bad("center_concentration and conversion_rate must lie in [0, 1]".into());
        }
        if self.seasonality < 0.0 || !self.seasonality.is_finite() {
            return bad("seasonality must be non-negative".into());
        }
        let any_rate = self.hotspots.iter().any(|h| h.daily_rate > 0.0)
            || self.noise_queries_per_day > 0.0
            || self.background_visits_mean > 0.0
            || self.signal.base > 0.0;
        if any_rate && self.n_users == 0 {
            return bad("n_users must be positive when any rate is nonzero".into());
        }
        for h in &self.hotspots {
            if !(h.spread_m > 0.0) || h.daily_rate < 0.0 || !h.daily_rate.is_finite() {
                return bad(format!(
                    "hotspot at {:?} needs spread_m > 0 and daily_rate >= 0",
                    h.center
                ));
            }
            if h.kind == QueryKind::Route && h.daily_rate > 0.0 {
                let Some(brand) = &h.brand else {
                    return bad("route hotspots must name a brand".into());
                };
                let stores = self
                    .target
                    .brands
                    .iter()
                    .find(|b| &b.name == brand)
                    .map_or(0, |b| b.count);
                if stores == 0 {
                    return bad(format!("route hotspot targets brand {brand:?} which has no stores"));
                }
            }
        }
        let capacity = self.n_users as f64 * self.days as f64;
        let peak = self.signal.base * (4.0f64).exp();
        if (self.signal.base > 0.0 || self.background_visits_mean > 0.0)
            && peak.max(self.background_visits_mean * 10.0) > capacity / 2.0
        {
            return bad("n_users x days too small for the planted visit counts".into());
        }
        Ok(())
    }
}

/// Deterministic day-level demand multiplier shared by queries and
/// converted visits.
fn season(day: u32, amplitude: f64) -> f64 {
    let d = day as f64;
    let weekly = (2.0 * std::f64::consts::PI * d / 7.0).sin();
    let monthly = (2.0 * std::f64::consts::PI * d / 29.0 + 1.0).sin();
    (1.0 + amplitude * (0.6 * weekly + 0.8 * monthly)).max(0.05)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as u64)
}

struct Generator<'a> {
    cfg: &'a CityConfig,
    rng: ChaCha8Rng,
    proj: LocalProjection,
    users: Vec<String>,
}

impl Generator<'_> {
    fn clamp_to_city(&self, x: f64, y: f64) -> GeoPoint {
        let h = self.cfg.half_extent_m;
        self.proj.unproject(x.clamp(-h, h), y.clamp(-h, h))
    }

    fn gaussian_around(&mut self, center: GeoPoint, spread_m: f64) -> GeoPoint {
        let normal = Normal::new(0.0, spread_m.max(1e-9)).expect("finite spread");
        let (cx, cy) = self.proj.project(center);
        let x = cx + normal.sample(&mut self.rng);
        let y = cy + normal.sample(&mut self.rng);
        self.clamp_to_city(x, y)
    }

    fn layout_point(&mut self) -> GeoPoint {
        if self.rng.random::<f64>() < self.cfg.center_concentration {
            self.gaussian_around(self.cfg.center, self.cfg.center_spread_m)
        } else {
            let h = self.cfg.half_extent_m;
            let x = self.rng.random_range(-h..=h);
            let y = self.rng.random_range(-h..=h);
            self.clamp_to_city(x, y)
        }
    }

    fn user(&mut self) -> String {
        let i = self.rng.random_range(0..self.users.len());
        self.users[i].clone()
    }

    fn time_of_day_s(&mut self) -> i64 {
        let peaks = &self.cfg.hour_peaks;
        let hour = if peaks.is_empty() {
            self.rng.random_range(0.0..24.0)
        } else {
            let peak = peaks[self.rng.random_range(0..peaks.len())];
            let jitter: f64 = Normal::new(0.0, 1.5).expect("valid").sample(&mut self.rng);
            (peak + jitter).rem_euclid(24.0)
        };
        ((hour * 3600.0) as i64).clamp(0, SECONDS_PER_DAY - 1)
    }

    fn day_start(&self, day: u32) -> i64 {
        self.cfg.start_ts + day as i64 * SECONDS_PER_DAY
    }

    fn pois(&mut self) -> (Vec<Poi>, Vec<usize>) {
        let cfg = self.cfg;
        let mut pois = Vec::new();
        for spec in &cfg.categories {
            for i in 0..spec.count {
                let location = self.layout_point();
                let unit_price = spec.center_price.map(|p0| {
                    let d = haversine_m(location, cfg.center);
                    let noise: f64 = Normal::new(0.0, 0.15).expect("valid").sample(&mut self.rng);
                    (p0 * (-d / 15_000.0).exp() * noise.exp()).round()
                });
                pois.push(Poi {
                    id: format!("{}-{:05}", spec.category_l2, i),
                    name: format!("{} {}", spec.category_l2, i),
                    location,
                    category_l1: spec.category_l1.clone(),
                    category_l2: spec.category_l2.clone(),
                    brand: None,
                    unit_price,
                });
            }
        }
        let t = &cfg.target;
        let mut target_idx = Vec::new();
        let mut serial = 0;
        let mut push_target = |g: &mut Self, pois: &mut Vec<Poi>, brand: Option<&BrandSpec>| {
            let location = match brand.and_then(|b| b.cluster) {
                Some(c) => g.gaussian_around(c.center, c.spread_m),
                None => g.layout_point(),
            };
            let name = brand.map_or_else(
                || format!("{} {serial}", t.category_l2),
                |b| format!("{} {serial}", b.name),
            );
            target_idx.push(pois.len());
            pois.push(Poi {
                id: format!("{}-{:05}", t.category_l2, serial),
                name,
                location,
                category_l1: t.category_l1.clone(),
                category_l2: t.category_l2.clone(),
                brand: brand.map(|b| b.name.clone()),
                unit_price: None,
            });
            serial += 1;
        };
        for brand in &t.brands {
            for _ in 0..brand.count {
                push_target(self, &mut pois, Some(brand));
            }
        }
        for _ in 0..t.unbranded {
            push_target(self, &mut pois, None);
        }
        (pois, target_idx)
    }

    /// Writes `count` distinct (user, day) visits to `poi_id`, each with one
    /// to three raw connection records.
    fn visits(&mut self, poi_id: &str, count: u64, out: &mut Vec<WifiRecord>) {
        let mut seen = HashSet::new();
        while (seen.len() as u64) < count {
            let u = self.rng.random_range(0..self.users.len());
            let day = self.rng.random_range(0..self.cfg.days);
            if !seen.insert((u, day)) {
                continue;
            }
            let connections = 1 + (self.rng.random::<f64>() < 0.3) as u32 + (self.rng.random::<f64>() < 0.1) as u32;
            for _ in 0..connections {
                let ts = self.day_start(day) + self.rng.random_range(8 * 3600..22 * 3600);
                out.push(WifiRecord {
                    user_id: self.users[u].clone(),
                    timestamp: ts,
                    poi_id: poi_id.to_string(),
                });
            }
        }
    }
}

/// Standardized-feature log-linear model that defines planted means.
struct PlantedModel {
    mean: [f64; FEATURE_COUNT],
    std: [f64; FEATURE_COUNT],
    signal: SignalSpec,
}

impl PlantedModel {
    fn fit(rows: &[FeatureVector], signal: SignalSpec) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        let mut std = [0.0; FEATURE_COUNT];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.to_array()) {
                *m += v / n;
            }
        }
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r.to_array()).zip(mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut std {
            *s = s.sqrt();
        }
        PlantedModel { mean, std, signal }
    }

    fn planted_mean(&self, f: &FeatureVector) -> f64 {
        let mut eta = 0.0;
        for (j, v) in f.to_array().into_iter().enumerate() {
            if self.std[j] > 0.0 {
                eta += self.signal.weights[j] * (v - self.mean[j]) / self.std[j];
            }
        }
        self.signal.base * eta.clamp(-4.0, 4.0).exp()
    }
}

pub fn generate_city(cfg: &CityConfig) -> Result<SyntheticCity, IngestError> {
    cfg.validate()?;
    let users = (0..cfg.n_users)
        .map(|i| anonymize(&format!("user-{i}"), &cfg.salt))
        .collect::<Result<Vec<_>, _>>()?;
    let mut g = Generator {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        proj: LocalProjection::new(cfg.center),
        users,
    };

    let (pois, target_idx) = g.pois();
    let is_target: HashSet<usize> = target_idx.iter().copied().collect();

    // background visits, then planted target visits
    let mut background = VisitTable::new();
    for (i, p) in pois.iter().enumerate() {
        if !is_target.contains(&i) {
            let jitter: f64 = Normal::new(0.0, 0.5).expect("valid").sample(&mut g.rng);
            let w = poisson(&mut g.rng, cfg.background_visits_mean * jitter.exp());
            background.set(&p.id, w);
        }
    }
    let fcfg = FeatureConfig::new(&cfg.target.category_l2).with_city_center(cfg.center);
    let ctx = FeatureContext::new(&pois, &background, fcfg).map_err(|e| IngestError::InvalidConfig(e.to_string()))?;
    let target_features: Vec<FeatureVector> = target_idx
        .iter()
        .map(|&i| ctx.feature_vector(pois[i].location, None))
        .collect();
    let planted = PlantedModel::fit(&target_features, cfg.signal.clone());
    let mut visits = background;
    let mut planted_mean = BTreeMap::new();
    for (&i, f) in target_idx.iter().zip(&target_features) {
        let mean = planted.planted_mean(f);
        planted_mean.insert(pois[i].id.clone(), mean);
        visits.set(&pois[i].id, poisson(&mut g.rng, mean));
    }

    let mut wifi = Vec::new();
    for p in &pois {
        let w = visits.count(&p.id);
        g.visits(&p.id, w, &mut wifi);
    }

    let queries = generate_queries(&mut g, &pois, &mut wifi);

    let hotspots = cfg
        .hotspots
        .iter()
        .map(|h| HotspotTruth {
            lat: h.center.lat,
            lng: h.center.lng,
            spread_m: h.spread_m,
            rate: h.daily_rate,
            planted_score: planted.planted_mean(&ctx.feature_vector(h.center, None)),
        })
        .collect();
    let mut true_ranking: Vec<String> = planted_mean.keys().cloned().collect();
    true_ranking.sort_by(|a, b| planted_mean[b].total_cmp(&planted_mean[a]).then_with(|| a.cmp(b)));

    wifi.sort_by(|a, b| (a.timestamp, &a.user_id, &a.poi_id).cmp(&(b.timestamp, &b.user_id, &b.poi_id)));
    Ok(SyntheticCity {
        queries,
        pois,
        wifi,
        manifest: GroundTruthManifest {
            hotspots,
            true_ranking,
            planted_mean,
            seed: cfg.seed,
            cfg: cfg.clone(),
        },
    })
}

fn visit(user_id: String, timestamp: i64, poi: &Poi) -> WifiRecord {
    WifiRecord {
        user_id,
        timestamp,
        poi_id: poi.id.clone(),
    }
}

fn generate_queries(g: &mut Generator<'_>, pois: &[Poi], wifi: &mut Vec<WifiRecord>) -> Vec<QueryRecord> {
    let cfg = g.cfg;
    let brand_stores = |name: &str| -> Vec<&Poi> { pois.iter().filter(|p| p.brand.as_deref() == Some(name)).collect() };
    let mut queries = Vec::new();
    let delay: Exp<f64> = Exp::new(1.0 / (3.0 * 3600.0)).expect("valid rate");
    let window_s = 1.5 * SECONDS_PER_DAY as f64;
    let noise_keywords = ["hotel", "mall", "subway", "hospital", "bank"];
    let served: Vec<&Poi> = pois.iter().filter(|p| p.brand.is_some()).collect();

    let mut destinations_per_day = vec![0u64; cfg.days as usize];
    for day in 0..cfg.days {
        let s = season(day, cfg.seasonality);
        let day_start = g.day_start(day);
        let mut emitted: Vec<(QueryRecord, Option<GeoPoint>)> = Vec::new();

        for h in &cfg.hotspots {
            let n = poisson(&mut g.rng, h.daily_rate * s);
            for _ in 0..n {
                let origin = g.gaussian_around(h.center, h.spread_m);
                let ts = day_start + g.time_of_day_s();
                let user = g.user();
                let q = match (h.kind, &h.brand) {
                    (QueryKind::Route, Some(brand)) => {
                        let stores = brand_stores(brand);
                        let dest = stores
                            .iter()
                            .min_by(|a, b| {
                                haversine_m(origin, a.location)
                                    .total_cmp(&haversine_m(origin, b.location))
                                    .then_with(|| a.id.cmp(&b.id))
                            })
                            .expect("validated: route brand has stores");
                        QueryRecord {
                            user_id: user,
                            timestamp: ts,
                            origin,
                            keyword: brand.clone(),
                            target_poi_id: Some(dest.id.clone()),
                            kind: QueryKind::Route,
                        }
                    }
                    _ => QueryRecord {
                        user_id: user,
                        timestamp: ts,
                        origin,
                        keyword: cfg.target.keyword.clone(),
                        target_poi_id: None,
                        kind: QueryKind::Nearby,
                    },
                };
                emitted.push((q, None));
            }
        }

        for store in &served {
            let n = poisson(&mut g.rng, cfg.served_daily_rate * s);
            for _ in 0..n {
                let origin = g.gaussian_around(store.location, cfg.served_spread_m);
                let ts = day_start + g.time_of_day_s();
                let user = g.user();
                emitted.push((
                    QueryRecord {
                        user_id: user,
                        timestamp: ts,
                        origin,
                        keyword: store.brand.clone().unwrap_or_default(),
                        target_poi_id: Some(store.id.clone()),
                        kind: QueryKind::Route,
                    },
                    Some(store.location),
                ));
            }
        }

        let n_noise = poisson(&mut g.rng, cfg.noise_queries_per_day);
        for _ in 0..n_noise {
            let h = cfg.half_extent_m;
            let (x, y) = (g.rng.random_range(-h..=h), g.rng.random_range(-h..=h));
            let origin = g.clamp_to_city(x, y);
            let ts = day_start + g.time_of_day_s();
            let keyword = noise_keywords[g.rng.random_range(0..noise_keywords.len())].to_string();
            let user = g.user();
            emitted.push((
                QueryRecord {
                    user_id: user,
                    timestamp: ts,
                    origin,
                    keyword,
                    target_poi_id: None,
                    kind: QueryKind::Nearby,
                },
                None,
            ));
        }

        for (q, _) in emitted {
            if let Some(dest_id) = q.target_poi_id.as_deref() {
                destinations_per_day[day as usize] += 1;
                if !cfg.independent_visits && g.rng.random::<f64>() < cfg.conversion_rate {
                    let dest = pois.iter().find(|p| p.id == dest_id).expect("destination exists");
                    let wait = delay.sample(&mut g.rng).min(window_s - 1.0) as i64;
                    wifi.push(visit(q.user_id.clone(), q.timestamp + wait, dest));
                }
            }
            queries.push(q);
        }
    }

    if cfg.independent_visits && cfg.conversion_rate > 0.0 {
        // same expected volume as conversion would produce, no day structure
        let total: u64 = destinations_per_day.iter().sum();
        let per_day = total as f64 * cfg.conversion_rate / cfg.days as f64;
        let dests: Vec<&Poi> = {
            let ids: HashSet<&str> = queries.iter().filter_map(|q| q.target_poi_id.as_deref()).collect();
            pois.iter().filter(|p| ids.contains(p.id.as_str())).collect()
        };
        if !dests.is_empty() {
            for day in 0..cfg.days {
                let n = poisson(&mut g.rng, per_day);
                for _ in 0..n {
                    let dest = dests[g.rng.random_range(0..dests.len())];
                    let ts = g.day_start(day) + g.time_of_day_s();
                    let user = g.user();
                    wifi.push(visit(user, ts, dest));
                }
            }
        }
    }

    queries.sort_by(|a, b| (a.timestamp, &a.user_id).cmp(&(b.timestamp, &b.user_id)));
    queries
}
