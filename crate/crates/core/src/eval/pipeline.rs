//! Demand centers in, ranked candidate locations out.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{dataset_for, EvalError};
use crate::demand::{find_demand_centers, DemandCenter, DemandConfig, DemandOutcome, Target};
use crate::features::{FeatureConfig, FeatureContext, FeatureVector, FEATURE_NAMES};
use crate::geo::GeoPoint;
use crate::ingest::synth::SyntheticCity;
use crate::ingest::{integrate_visits, CategoryAliases, Poi, QueryRecord, RawCity, VisitTable};
use crate::learners::{self, FittedModel, ModelSpec, SavedModel};

/// Loaded inputs of one city.
#[derive(Debug, Clone, Default)]
pub struct CityData {
    pub queries: Vec<QueryRecord>,
    pub pois: Vec<Poi>,
    pub visits: VisitTable,
    pub aliases: CategoryAliases,
}

impl CityData {
    pub fn from_raw(raw: RawCity, tz_offset_s: i64) -> Self {
        let integration = integrate_visits(&raw.wifi, &raw.pois, tz_offset_s);
        if integration.dropped > 0 {
            log::warn!(
                "{} WiFi records name unknown POIs and were dropped",
                integration.dropped
            );
        }
        CityData {
            queries: raw.queries,
            visits: integration.visits,
            pois: raw.pois,
            aliases: raw.aliases,
        }
    }

    pub fn from_synthetic(city: &SyntheticCity) -> Self {
        let cfg = &city.manifest.cfg;
        CityData {
            queries: city.queries.clone(),
            pois: city.pois.clone(),
            visits: integrate_visits(&city.wifi, &city.pois, cfg.tz_offset_s).visits,
            aliases: cfg.aliases(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub demand: DemandConfig,
    pub city_center: GeoPoint,
    pub radius_m: f64,
    /// Keep only the best `top_k` candidates.
    pub top_k: Option<usize>,
}

impl Default for PipelineParams {
    fn default() -> Self {
        let f = FeatureConfig::new("");
        PipelineParams {
            demand: DemandConfig::default(),
            city_center: f.city_center,
            radius_m: f.radius_m,
            top_k: None,
        }
    }
}

impl PipelineParams {
    pub fn feature_config(&self, category: &str) -> FeatureConfig {
        let mut cfg = FeatureConfig::new(category).with_city_center(self.city_center);
        cfg.radius_m = self.radius_m;
        cfg
    }
}

pub fn feature_context(data: &CityData, category: &str, params: &PipelineParams) -> Result<FeatureContext, EvalError> {
    Ok(FeatureContext::new(
        &data.pois,
        &data.visits,
        params.feature_config(category),
    )?)
}

fn category_pois<'a>(ctx: &'a FeatureContext, category: &str) -> Vec<&'a Poi> {
    let mut pois: Vec<&Poi> = ctx.pois().iter().filter(|p| p.in_category(category)).collect();
    pois.sort_by(|a, b| a.id.cmp(&b.id));
    pois
}

/// Fit `spec` on every existing POI of `category`.
pub fn train_category_model(
    ctx: &FeatureContext,
    category: &str,
    spec: &ModelSpec,
    seed: u64,
) -> Result<SavedModel<f64>, EvalError> {
    let pois = category_pois(ctx, category);
    if pois.is_empty() {
        return Err(EvalError::NoTraining(category.to_string()));
    }
    let spec = spec.with_seed(seed);
    let model = learners::fit(&spec, &dataset_for(ctx, &pois)?)?;
    Ok(SavedModel {
        spec,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLng {
    pub lat: f64,
    pub lng: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCenter {
    pub rank: usize,
    pub center: LatLng,
    pub predicted_customers: f64,
    pub features: FeatureVector,
    pub member_count: usize,
    pub weight: f64,
}

fn predict_rows(model: &FittedModel<f64>, rows: &[FeatureVector]) -> Vec<f64> {
    let x = ndarray::Array2::from_shape_fn((rows.len(), FEATURE_NAMES.len()), |(i, j)| rows[i].to_array()[j]);
    model.predict(x.view()).to_vec()
}

/// Candidates by descending prediction, then descending member count,
/// then ascending latitude and longitude.
pub fn rank_centers(
    ctx: &FeatureContext,
    centers: &[DemandCenter],
    model: &SavedModel<f64>,
) -> Result<Vec<RankedCenter>, EvalError> {
    if model.feature_names != FEATURE_NAMES {
        return Err(EvalError::FeatureMismatch {
            found: model.feature_names.clone(),
        });
    }
    let features: Vec<FeatureVector> = centers.iter().map(|c| ctx.feature_vector(c.location, None)).collect();
    let pred = predict_rows(&model.model, &features);
    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&centers[a], &centers[b]);
        pred[b]
            .total_cmp(&pred[a])
            .then(cb.member_count.cmp(&ca.member_count))
            .then(ca.location.lat.total_cmp(&cb.location.lat))
            .then(ca.location.lng.total_cmp(&cb.location.lng))
    });
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(r, i)| RankedCenter {
            rank: r + 1,
            center: LatLng {
                lat: centers[i].location.lat,
                lng: centers[i].location.lng,
            },
            predicted_customers: pred[i],
            features: features[i],
            member_count: centers[i].member_count,
            weight: centers[i].weight,
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub enum ModelSource<'a> {
    Train(&'a ModelSpec),
    Fitted(&'a SavedModel<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    NoDemand,
    NoGap,
}

impl Status {
    pub fn describe(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NoDemand => "no queries express demand for the target",
            Status::NoGap => "all demand is served by existing stores",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineResult {
    pub status: Status,
    pub demand: DemandOutcome,
    pub ranking: Vec<RankedCenter>,
}

/// Find demand centers for `target`, train on the target's category (or
/// use a fitted model) and rank the centers by predicted customers.
pub fn run_pipeline(
    data: &CityData,
    target: &Target,
    params: &PipelineParams,
    model: ModelSource<'_>,
    seed: u64,
) -> Result<PipelineResult, EvalError> {
    let demand = find_demand_centers(&data.queries, &data.pois, target, &data.aliases, &params.demand, seed)?;
    let status = if demand.demand_points == 0 {
        Status::NoDemand
    } else if demand.centers.is_empty() {
        Status::NoGap
    } else {
        Status::Ok
    };
    if status != Status::Ok {
        return Ok(PipelineResult {
            status,
            demand,
            ranking: Vec::new(),
        });
    }
    let category = target
        .category(&data.pois)
        .ok_or_else(|| EvalError::NoTraining(target.name().to_string()))?;
    let ctx = feature_context(data, &category, params)?;
    let trained;
    let saved = match model {
        ModelSource::Fitted(m) => m,
        ModelSource::Train(spec) => {
            trained = train_category_model(&ctx, &category, spec, seed)?;
            &trained
        }
    };
    let mut ranking = rank_centers(&ctx, &demand.centers, saved)?;
    if let Some(k) = params.top_k {
        ranking.truncate(k);
    }
    Ok(PipelineResult {
        status,
        demand,
        ranking,
    })
}

/// What-if result at an arbitrary point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub lat: f64,
    pub lng: f64,
    pub features: FeatureVector,
    pub predicted_customers: f64,
}

/// Features and predicted customers at `point`. A `category` POI sitting
/// exactly at the point has its own visits excluded, as in training.
pub fn analyze(
    ctx: &FeatureContext,
    category: &str,
    model: &SavedModel<f64>,
    point: GeoPoint,
) -> Result<Analysis, EvalError> {
    if model.feature_names != FEATURE_NAMES {
        return Err(EvalError::FeatureMismatch {
            found: model.feature_names.clone(),
        });
    }
    let resident = category_pois(ctx, category).into_iter().find(|p| p.location == point);
    let features = ctx.feature_vector(point, resident.map(|p| p.id.as_str()));
    Ok(Analysis {
        lat: point.lat,
        lng: point.lng,
        features,
        predicted_customers: predict_rows(&model.model, &[features])[0],
    })
}

/// One line of `features.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub features: FeatureVector,
    pub target: Option<u64>,
}

/// Category POIs (own visits excluded) followed by the candidates, named
/// `center-<index>`.
pub fn feature_rows(ctx: &FeatureContext, category: &str, centers: &[DemandCenter]) -> Vec<FeatureRow> {
    let pois = category_pois(ctx, category);
    let existing = pois.iter().map(|p| FeatureRow {
        id: p.id.clone(),
        features: ctx.feature_vector(p.location, Some(&p.id)),
        target: Some(ctx.visits_of(&p.id)),
    });
    let candidates = centers.iter().enumerate().map(|(i, c)| FeatureRow {
        id: format!("center-{i}"),
        features: ctx.feature_vector(c.location, None),
        target: None,
    });
    existing.chain(candidates).collect()
}

impl FeatureRow {
    pub fn write_csv<W: Write>(rows: &[FeatureRow], out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["poi_or_center_id"];
        header.extend(FEATURE_NAMES);
        header.push("target");
        w.write_record(&header)?;
        for r in rows {
            let mut rec = vec![r.id.clone()];
            rec.extend(r.features.to_array().iter().map(f64::to_string));
            rec.push(r.target.map(|t| t.to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub category: String,
    pub model: ModelSpec,
    pub n_train: usize,
    pub features: Vec<FeatureImportance>,
}

/// Impurity-decrease importance of a forest fit on `category`.
pub fn importance_report(
    ctx: &FeatureContext,
    category: &str,
    spec: &ModelSpec,
    seed: u64,
) -> Result<ImportanceReport, EvalError> {
    if !matches!(spec, ModelSpec::RandomForest(_)) {
        return Err(EvalError::Unsupported(format!(
            "feature importance needs a random_forest spec, got {}",
            spec.name()
        )));
    }
    let saved = train_category_model(ctx, category, spec, seed)?;
    let weights = saved.model.feature_importance().expect("forest reports importance");
    Ok(ImportanceReport {
        category: category.to_string(),
        model: saved.spec,
        n_train: category_pois(ctx, category).len(),
        features: FEATURE_NAMES
            .iter()
            .zip(weights)
            .map(|(n, w)| FeatureImportance {
                name: n.to_string(),
                weight: w,
            })
            .collect(),
    })
}
