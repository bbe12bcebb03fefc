use std::collections::{BTreeMap, BTreeSet, HashMap};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use storeplace::demand::{extract_demand, find_demand_centers, heatmap as bucket, DemandConfig, Target};
use storeplace::eval::{analyze as analyze_at, rank_centers, Status};
use storeplace::geo::GeoPoint;
use storeplace::learners::ModelSpec;
use storeplace::to_json;

use crate::{ApiError, AppState, Job};

pub const DEFAULT_CELL_M: f64 = 500.0;

fn json_body(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn resolve(state: &AppState, name: &str) -> Result<Target, ApiError> {
    Target::resolve(name, &state.data()?.pois).ok_or_else(|| ApiError::UnknownTarget(name.to_string()))
}

fn category_of(state: &AppState, target: &Target) -> Result<String, ApiError> {
    target
        .category(&state.data()?.pois)
        .ok_or_else(|| ApiError::UnknownTarget(target.name().to_string()))
}

/// Recursively overlay `patch` onto `base`.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

/// Demand parameters with request overrides applied on top of the
/// service's configured values.
pub fn merged_params(base: &DemandConfig, overrides: Option<Value>) -> Result<DemandConfig, ApiError> {
    let Some(patch) = overrides else {
        return Ok(base.clone());
    };
    let mut v = serde_json::to_value(base).map_err(|e| ApiError::Internal(e.to_string()))?;
    merge(&mut v, patch);
    let cfg: DemandConfig = serde_json::from_value(v).map_err(|e| ApiError::Invalid(e.to_string()))?;
    cfg.exclusion.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
pub struct Health {
    status: &'static str,
    service: &'static str,
    version: &'static str,
    loaded: bool,
}

pub async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok",
        service: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        loaded: state.is_loaded(),
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CategoryInfo {
    pub category: String,
    pub category_l1: String,
    pub poi_count: usize,
    pub brands: Vec<String>,
}

pub async fn categories(State(state): State<AppState>) -> Result<Response, ApiError> {
    let data = state.data()?;
    let mut by: BTreeMap<&str, (&str, usize, BTreeSet<&str>)> = BTreeMap::new();
    for p in &data.pois {
        let e = by
            .entry(p.category_l2.as_str())
            .or_insert((p.category_l1.as_str(), 0, BTreeSet::new()));
        e.1 += 1;
        if let Some(b) = p.brand.as_deref() {
            e.2.insert(b);
        }
    }
    let list: Vec<CategoryInfo> = by
        .into_iter()
        .map(|(c, (l1, n, brands))| CategoryInfo {
            category: c.to_string(),
            category_l1: l1.to_string(),
            poi_count: n,
            brands: brands.into_iter().map(String::from).collect(),
        })
        .collect();
    Ok(json_body(StatusCode::OK, to_json(&list)))
}

#[derive(Debug, Deserialize)]
pub struct DemandRequest {
    pub target: String,
    #[serde(default)]
    pub params: Option<Value>,
    #[serde(default)]
    pub seed: u64,
}

pub async fn demand_centers(
    State(state): State<AppState>,
    Json(req): Json<DemandRequest>,
) -> Result<Response, ApiError> {
    let target = resolve(&state, &req.target)?;
    let cfg = merged_params(&state.config().params.demand, req.params)?;
    let inner = state.clone();
    let body = state
        .blocking(move || {
            let data = inner.data()?;
            let outcome = find_demand_centers(&data.queries, &data.pois, &target, &data.aliases, &cfg, req.seed)?;
            Ok(to_json(&outcome.centers))
        })
        .await?;
    Ok(json_body(StatusCode::OK, body))
}

#[derive(Debug, Clone, Deserialize)]
pub struct RankRequest {
    pub target: String,
    #[serde(default)]
    pub model_spec: Option<ModelSpec>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

async fn rank_body(state: AppState, req: RankRequest, target: Target, spec: ModelSpec) -> Result<String, ApiError> {
    let cfg = state.config().params.demand.clone();
    let inner = state.clone();
    let t = target.clone();
    let outcome = state
        .blocking(move || {
            let data = inner.data()?;
            Ok(find_demand_centers(
                &data.queries,
                &data.pois,
                &t,
                &data.aliases,
                &cfg,
                req.seed,
            )?)
        })
        .await?;
    if outcome.centers.is_empty() {
        let status = if outcome.demand_points == 0 {
            Status::NoDemand
        } else {
            Status::NoGap
        };
        return Err(ApiError::NoCandidates(status));
    }
    let category = category_of(&state, &target)?;
    let ctx = state.context(&category).await?;
    let model = state.model(&category, &spec, req.seed).await?;
    let k = req.k.or(state.config().params.top_k);
    state
        .blocking(move || {
            let mut ranking = rank_centers(&ctx, &outcome.centers, &model)?;
            if let Some(k) = k {
                ranking.truncate(k);
            }
            Ok(to_json(&ranking))
        })
        .await
}

#[derive(Serialize)]
struct JobAccepted {
    job_id: u64,
    status: &'static str,
}

pub async fn rank(State(state): State<AppState>, Json(req): Json<RankRequest>) -> Result<Response, ApiError> {
    let target = resolve(&state, &req.target)?;
    let spec = req.model_spec.unwrap_or(state.config().default_spec);
    spec.validate()?;
    let mut task = tokio::spawn(rank_body(state.clone(), req, target, spec));
    let finished = tokio::time::timeout(state.config().job_after, &mut task).await;
    match finished {
        Ok(joined) => {
            let body = joined.map_err(|e| ApiError::Internal(e.to_string()))??;
            Ok(json_body(StatusCode::OK, body))
        }
        Err(_) => {
            let id = state.new_job();
            let jobs = state.clone();
            tokio::spawn(async move {
                let result = task.await.unwrap_or_else(|e| Err(ApiError::Internal(e.to_string())));
                jobs.finish_job(id, result);
            });
            let location = format!("/api/jobs/{id}");
            let body = to_json(&JobAccepted {
                job_id: id,
                status: "running",
            });
            Ok((
                StatusCode::ACCEPTED,
                [
                    (header::CONTENT_TYPE, "application/json".to_string()),
                    (header::LOCATION, location),
                ],
                body,
            )
                .into_response())
        }
    }
}

pub async fn job(State(state): State<AppState>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let job = state.0.jobs.lock().expect("job lock").get(&id).cloned();
    match job {
        None => Err(ApiError::UnknownJob(id)),
        Some(Job::Running) => Ok(json_body(
            StatusCode::ACCEPTED,
            to_json(&JobAccepted {
                job_id: id,
                status: "running",
            }),
        )),
        Some(Job::Done(Ok(body))) => Ok(json_body(StatusCode::OK, body)),
        Some(Job::Done(Err(e))) => Err(e),
    }
}

fn parse_f64(q: &HashMap<String, String>, key: &str) -> Result<Option<f64>, ApiError> {
    q.get(key)
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| ApiError::BadRequest(format!("{key} must be a number, got {s:?}")))
        })
        .transpose()
}

fn required<'a>(q: &'a HashMap<String, String>, key: &str) -> Result<&'a str, ApiError> {
    q.get(key)
        .map(String::as_str)
        .ok_or_else(|| ApiError::BadRequest(format!("missing query parameter {key}")))
}

pub async fn analyze(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let lat = parse_f64(&q, "lat")?.ok_or_else(|| ApiError::BadRequest("missing query parameter lat".into()))?;
    let lng = parse_f64(&q, "lng")?.ok_or_else(|| ApiError::BadRequest("missing query parameter lng".into()))?;
    let point = GeoPoint::new(lat, lng).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let seed = match q.get("seed") {
        Some(s) => s
            .parse::<u64>()
            .map_err(|_| ApiError::BadRequest(format!("seed must be an unsigned integer, got {s:?}")))?,
        None => 0,
    };
    let target = resolve(&state, required(&q, "target")?)?;
    let category = category_of(&state, &target)?;
    let ctx = state.context(&category).await?;
    let model = state.model(&category, &state.config().default_spec, seed).await?;
    let analysis = analyze_at(&ctx, &category, &model, point)?;
    Ok(json_body(StatusCode::OK, to_json(&analysis)))
}

pub async fn heatmap(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let target = resolve(&state, required(&q, "target")?)?;
    let cell_m = parse_f64(&q, "cell_m")?.unwrap_or(DEFAULT_CELL_M);
    let inner = state.clone();
    let body = state
        .blocking(move || {
            let data = inner.data()?;
            let points: Vec<GeoPoint> = extract_demand(&data.queries, &data.pois, &target, &data.aliases)
                .into_iter()
                .map(|p| p.location)
                .collect();
            Ok(to_json(&bucket(&points, cell_m)?))
        })
        .await?;
    Ok(json_body(StatusCode::OK, body))
}

pub async fn clear_cache(State(state): State<AppState>) -> StatusCode {
    state.clear_caches();
    StatusCode::NO_CONTENT
}
