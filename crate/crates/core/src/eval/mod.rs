//! Ranking evaluation: metrics, the leave-brand-out and repeated-split
//! protocols, and the end-to-end placement pipeline.

mod metrics;
mod pipeline;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{
    dcg, mean_over_shuffles, ndcg_at_k, ndcg_from_relevance, nsd_at_k, random_baseline, relevance, Metric, RankedList,
};
pub use pipeline::{
    analyze, feature_context, feature_rows, importance_report, rank_centers, run_pipeline, train_category_model,
    Analysis, CityData, FeatureImportance, FeatureRow, ImportanceReport, LatLng, ModelSource, PipelineParams,
    PipelineResult, RankedCenter, Status,
};

use crate::demand::DemandError;
use crate::features::{FeatureContext, FeatureVector, FEATURE_COUNT};
use crate::geo::GeoError;
use crate::ingest::Poi;
use crate::learners::{self, Dataset, LearnError, ModelSpec};

/// Shuffles behind every random-baseline figure.
pub const BASELINE_REPEATS: usize = 100;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("duplicate id {0:?} in ranked list")]
    DuplicateId(String),
    #[error("item {0:?} is not in the actual ranking")]
    UnknownItem(String),
    #[error("k = {k} exceeds list length {len}")]
    KTooLarge { k: usize, len: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{name:?} has {have} POIs but k = {need}")]
    TooFewItems { name: String, have: usize, need: usize },
    #[error("no training POIs in category {0:?}")]
    NoTraining(String),
    #[error("invalid protocol parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error("model expects features {found:?}")]
    FeatureMismatch { found: Vec<String> },
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Protocol {
    LeaveBrandOut {
        category: String,
        test_brand: String,
    },
    SpecificSplit {
        brand: String,
        test_fraction: f64,
        repeats: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub ndcg: f64,
    pub nsd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub ndcg: f64,
    pub nsd: f64,
    pub baseline: MetricPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub model: ModelSpec,
    pub k: usize,
    pub n_items: usize,
    pub ndcg: f64,
    pub nsd: f64,
    pub baseline: MetricPair,
    pub repeats: Vec<RepeatResult>,
    pub seed: u64,
}

/// Per-repeat seed derived from the master seed.
pub fn derive_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Features (own visits excluded) and customer counts for `pois`.
pub fn dataset_for(ctx: &FeatureContext, pois: &[&Poi]) -> Result<Dataset<f64>, EvalError> {
    let rows: Vec<FeatureVector> = pois
        .iter()
        .map(|p| ctx.feature_vector(p.location, Some(&p.id)))
        .collect();
    let x = ndarray::Array2::from_shape_fn((rows.len(), FEATURE_COUNT), |(i, j)| rows[i].to_array()[j]);
    let y = pois.iter().map(|p| ctx.visits_of(&p.id) as f64).collect();
    let ids = pois.iter().map(|p| p.id.clone()).collect();
    Ok(Dataset::new(x, y, ids, None)?)
}

/// POIs ordered by descending customer count, ties by ascending id.
pub fn actual_ranking(ctx: &FeatureContext, pois: &[&Poi]) -> Result<RankedList, EvalError> {
    let ids: Vec<String> = pois.iter().map(|p| p.id.clone()).collect();
    let w: Vec<f64> = pois.iter().map(|p| ctx.visits_of(&p.id) as f64).collect();
    RankedList::from_scores(&ids, &w)
}

fn sorted_by_id(mut pois: Vec<&Poi>) -> Vec<&Poi> {
    pois.sort_by(|a, b| a.id.cmp(&b.id));
    pois
}

/// Training and test POIs of the leave-brand-out protocol: the test brand's
/// stores against every other POI of the category, both ordered by id.
pub fn leave_brand_out_split<'a>(
    ctx: &'a FeatureContext,
    category: &str,
    test_brand: &str,
) -> (Vec<&'a Poi>, Vec<&'a Poi>) {
    let (test, train): (Vec<&Poi>, Vec<&Poi>) = ctx
        .pois()
        .iter()
        .filter(|p| p.in_category(category))
        .partition(|p| p.has_brand(test_brand));
    (sorted_by_id(train), sorted_by_id(test))
}

fn score(
    spec: &ModelSpec,
    ctx: &FeatureContext,
    train: &[&Poi],
    test: &[&Poi],
    k: usize,
    seed: u64,
) -> Result<(MetricPair, MetricPair), EvalError> {
    let actual = actual_ranking(ctx, test)?;
    let baseline = MetricPair {
        ndcg: random_baseline(&actual, k, Metric::Ndcg, BASELINE_REPEATS, seed)?,
        nsd: random_baseline(&actual, k, Metric::Nsd, BASELINE_REPEATS, seed)?,
    };
    if let ModelSpec::Baseline(_) = spec {
        return Ok((baseline, baseline));
    }
    let train_set = dataset_for(ctx, train)?;
    let test_set = dataset_for(ctx, test)?;
    let model = learners::fit(&spec.with_seed(seed), &train_set)?;
    let pred = model.predict(test_set.x.view());
    let predicted = RankedList::from_scores(&test_set.ids, pred.as_slice().expect("contiguous predictions"))?;
    let got = MetricPair {
        ndcg: ndcg_at_k(&predicted, &actual, k)?,
        nsd: nsd_at_k(&predicted, &actual, k)?,
    };
    Ok((got, baseline))
}

/// Train on the category without `test_brand`, rank that brand's stores.
pub fn leave_brand_out_eval(
    ctx: &FeatureContext,
    category: &str,
    test_brand: &str,
    spec: &ModelSpec,
    k: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    let (train, test) = leave_brand_out_split(ctx, category, test_brand);
    if test.len() < k || k == 0 {
        return Err(EvalError::TooFewItems {
            name: test_brand.to_string(),
            have: test.len(),
            need: k,
        });
    }
    if train.is_empty() {
        return Err(EvalError::NoTraining(category.to_string()));
    }
    log::info!(
        "leave-brand-out: training on {} {category} POIs, excluding {} {test_brand} POIs",
        train.len(),
        test.len()
    );
    let (got, baseline) = score(spec, ctx, &train, &test, k, seed)?;
    Ok(EvalReport {
        protocol: Protocol::LeaveBrandOut {
            category: category.to_string(),
            test_brand: test_brand.to_string(),
        },
        model: spec.with_seed(seed),
        k,
        n_items: test.len(),
        ndcg: got.ndcg,
        nsd: got.nsd,
        baseline,
        repeats: vec![RepeatResult {
            repeat: 0,
            seed,
            n_train: train.len(),
            n_test: test.len(),
            ndcg: got.ndcg,
            nsd: got.nsd,
            baseline,
        }],
        seed,
    })
}

/// Repeated random train/test splits of one brand's stores.
pub fn specific_split_eval(
    ctx: &FeatureContext,
    brand: &str,
    spec: &ModelSpec,
    k: usize,
    test_fraction: f64,
    repeats: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::InvalidParam {
            name: "test_fraction",
            value: test_fraction,
        });
    }
    if repeats == 0 {
        return Err(EvalError::InvalidParam {
            name: "repeats",
            value: 0.0,
        });
    }
    let stores = sorted_by_id(ctx.pois().iter().filter(|p| p.has_brand(brand)).collect());
    let n_test = (test_fraction * stores.len() as f64).round() as usize;
    if n_test < k || k == 0 || n_test == stores.len() {
        return Err(EvalError::TooFewItems {
            name: brand.to_string(),
            have: n_test,
            need: k,
        });
    }
    let results = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let rseed = derive_seed(seed, r);
            let mut order = stores.clone();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(rseed));
            let (test, train) = order.split_at(n_test);
            let train = sorted_by_id(train.to_vec());
            let test = sorted_by_id(test.to_vec());
            let (got, baseline) = score(spec, ctx, &train, &test, k, rseed)?;
            Ok(RepeatResult {
                repeat: r,
                seed: rseed,
                n_train: train.len(),
                n_test: test.len(),
                ndcg: got.ndcg,
                nsd: got.nsd,
                baseline,
            })
        })
        .collect::<Result<Vec<RepeatResult>, EvalError>>()?;
    let mean = |f: fn(&RepeatResult) -> f64| results.iter().map(f).sum::<f64>() / repeats as f64;
    Ok(EvalReport {
        protocol: Protocol::SpecificSplit {
            brand: brand.to_string(),
            test_fraction,
            repeats,
        },
        model: spec.with_seed(seed),
        k,
        n_items: n_test,
        ndcg: mean(|r| r.ndcg),
        nsd: mean(|r| r.nsd),
        baseline: MetricPair {
            ndcg: mean(|r| r.baseline.ndcg),
            nsd: mean(|r| r.baseline.nsd),
        },
        repeats: results,
        seed,
    })
}
