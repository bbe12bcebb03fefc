//! Local HTTP/JSON service over the placement pipeline: categories, demand
//! centers, rankings, what-if analysis and demand heatmaps.

mod error;
mod handlers;

use std::collections::HashMap;
use std::future::Future;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use axum::http::{HeaderValue, Method};
use axum::routing::{delete, get, post};
use axum::Router;
use storeplace::eval::{feature_context, train_category_model, CityData, PipelineParams};
use storeplace::features::FeatureContext;
use storeplace::learners::ModelSpec;
use storeplace::SavedModel;
use tokio::sync::{OnceCell, Semaphore};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::ApiError;

pub const DEFAULT_PORT: u16 = 8787;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub params: PipelineParams,
    /// Model behind `/api/analyze` and rank requests without a spec.
    pub default_spec: ModelSpec,
    /// Concurrent CPU-bound jobs.
    pub workers: usize,
    /// Rank requests still fitting after this long become polled jobs.
    pub job_after: Duration,
    /// Allowed browser origins; empty allows any localhost origin.
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            params: PipelineParams::default(),
            default_spec: ModelSpec::default(),
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
            job_after: Duration::from_secs(2),
            cors_origins: Vec::new(),
        }
    }
}

type Slot<T> = Arc<OnceCell<Arc<T>>>;

#[derive(Debug, Clone)]
pub(crate) enum Job {
    Running,
    Done(Result<String, ApiError>),
}

pub(crate) struct Inner {
    pub(crate) config: ServiceConfig,
    data: OnceLock<CityData>,
    contexts: Mutex<HashMap<String, Slot<FeatureContext>>>,
    models: Mutex<HashMap<String, Slot<SavedModel>>>,
    pub(crate) jobs: Mutex<HashMap<u64, Job>>,
    next_job: AtomicU64,
    pool: Semaphore,
}

/// Shared service state: immutable data plus derived caches.
#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Inner>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let workers = config.workers.max(1);
        AppState(Arc::new(Inner {
            config,
            data: OnceLock::new(),
            contexts: Mutex::default(),
            models: Mutex::default(),
            jobs: Mutex::default(),
            next_job: AtomicU64::new(1),
            pool: Semaphore::new(workers),
        }))
    }

    /// Install the data sets; later calls are ignored.
    pub fn load(&self, data: CityData) -> bool {
        self.0.data.set(data).is_ok()
    }

    pub fn is_loaded(&self) -> bool {
        self.0.data.get().is_some()
    }

    pub(crate) fn data(&self) -> Result<&CityData, ApiError> {
        self.0.data.get().ok_or(ApiError::NotLoaded)
    }

    pub(crate) fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    /// Drop cached feature contexts and models.
    pub fn clear_caches(&self) {
        self.0.contexts.lock().expect("cache lock").clear();
        self.0.models.lock().expect("cache lock").clear();
    }

    /// Run CPU-bound work on the blocking pool, bounded by `workers`.
    pub(crate) async fn blocking<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        F: FnOnce() -> Result<T, ApiError> + Send + 'static,
        T: Send + 'static,
    {
        let _permit = self
            .0
            .pool
            .acquire()
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        tokio::task::spawn_blocking(f)
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))?
    }

    pub(crate) async fn context(&self, category: &str) -> Result<Arc<FeatureContext>, ApiError> {
        let slot = self
            .0
            .contexts
            .lock()
            .expect("cache lock")
            .entry(category.to_string())
            .or_default()
            .clone();
        slot.get_or_try_init(|| {
            let state = self.clone();
            let category = category.to_string();
            async move {
                let inner = state.clone();
                state
                    .blocking(move || {
                        let data = inner.data()?;
                        Ok(Arc::new(feature_context(data, &category, &inner.config().params)?))
                    })
                    .await
            }
        })
        .await
        .cloned()
    }

    /// Fitted model for `(category, spec, seed)`; concurrent requests for
    /// one key share a single fit.
    pub(crate) async fn model(&self, category: &str, spec: &ModelSpec, seed: u64) -> Result<Arc<SavedModel>, ApiError> {
        let spec = spec.with_seed(seed);
        let key = format!("{category}\u{1f}{}", spec.key());
        let slot = self
            .0
            .models
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_default()
            .clone();
        slot.get_or_try_init(|| async {
            let ctx = self.context(category).await?;
            let category = category.to_string();
            self.blocking(move || {
                log::info!("fitting {} on {category}", spec.name());
                Ok(Arc::new(train_category_model(&ctx, &category, &spec, seed)?))
            })
            .await
        })
        .await
        .cloned()
    }

    pub(crate) fn new_job(&self) -> u64 {
        let id = self.0.next_job.fetch_add(1, Ordering::Relaxed);
        self.0.jobs.lock().expect("job lock").insert(id, Job::Running);
        id
    }

    pub(crate) fn finish_job(&self, id: u64, result: Result<String, ApiError>) {
        self.0.jobs.lock().expect("job lock").insert(id, Job::Done(result));
    }
}

fn cors(origins: &[String]) -> CorsLayer {
    let allow = if origins.is_empty() {
        AllowOrigin::predicate(|origin: &HeaderValue, _| {
            origin.to_str().is_ok_and(|o| {
                let host = o.split("://").nth(1).unwrap_or("");
                let host = host.split(':').next().unwrap_or("");
                host == "localhost" || host == "127.0.0.1"
            })
        })
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST, Method::DELETE])
        .allow_headers(Any)
}

pub fn router(state: AppState) -> Router {
    let layer = cors(&state.config().cors_origins);
    Router::new()
        .route("/api/health", get(handlers::health))
        .route("/api/categories", get(handlers::categories))
        .route("/api/demand-centers", post(handlers::demand_centers))
        .route("/api/rank", post(handlers::rank))
        .route("/api/analyze", get(handlers::analyze))
        .route("/api/heatmap", get(handlers::heatmap))
        .route("/api/cache", delete(handlers::clear_cache))
        .route("/api/jobs/{id}", get(handlers::job))
        .layer(layer)
        .with_state(state)
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
