//! Regression and learning-to-rank models written from scratch: Lasso,
//! kernel ridge regression, random forest, gradient-boosted trees,
//! LambdaMART and a seeded random baseline.

mod forest;
mod gbdt;
mod krr;
mod lambdamart;
mod lasso;
pub mod linalg;
mod tree;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{bootstrap_rows, ForestModel};
pub use gbdt::GbdtModel;
pub use krr::{kernel_matrix, rbf, KrrModel, KRR_RESIDUAL_TOL};
pub use lambdamart::{graded_ndcg, group_rows, lambdas, quintile_grades, LambdaMartModel, LambdaMartParams};
pub use lasso::{alpha_max, coordinate_descent, kkt_violation, LassoModel, LASSO_MAX_SWEEPS, LASSO_TOL};
pub use tree::{Criterion, Node, RegressionTree, TreeParams};

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty training set")]
    Empty,
    #[error("matrix is not positive definite (pivot {pivot}); duplicate rows need a positive ridge")]
    NotPositiveDefinite { pivot: usize },
    #[error("invalid hyperparameter {name} = {value}")]
    InvalidHyper { name: &'static str, value: f64 },
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Feature matrix, targets, row ids and optional ranking groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub x: Array2<T>,
    pub y: Array1<T>,
    pub ids: Vec<String>,
    pub groups: Option<Vec<usize>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: Array2<T>, y: Array1<T>, ids: Vec<String>, groups: Option<Vec<usize>>) -> Result<Self, LearnError> {
        let n = x.nrows();
        if y.len() != n || ids.len() != n || groups.as_ref().is_some_and(|g| g.len() != n) {
            return Err(LearnError::Shape(format!(
                "{} rows, {} targets, {} ids, {:?} groups",
                n,
                y.len(),
                ids.len(),
                groups.as_ref().map(Vec::len)
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite("features"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite("targets"));
        }
        Ok(Dataset { x, y, ids, groups })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Dataset {
            x: self.x.select(Axis(0), idx),
            y: self.y.select(Axis(0), idx),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            groups: self.groups.as_ref().map(|g| idx.iter().map(|&i| g[i]).collect()),
        }
    }
}

/// Per-column z-scoring fit on training data; constant columns keep unit
/// scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Standardizer<T> {
    pub mean: Array1<T>,
    pub scale: Array1<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(x: ArrayView2<T>) -> Self {
        let d = x.ncols();
        let n = T::of_usize(x.nrows().max(1));
        let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(d));
        let scale = Array1::from_shape_fn(d, |j| {
            let var = x.column(j).iter().map(|v| (*v - mean[j]) * (*v - mean[j])).sum::<T>() / n;
            let s = var.sqrt();
            if s > T::zero() {
                s
            } else {
                T::one()
            }
        });
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: ArrayView2<T>) -> Array2<T> {
        (&x - &self.mean) / &self.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoSpec {
    pub alpha: f64,
}

impl Default for LassoSpec {
    fn default() -> Self {
        LassoSpec { alpha: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KrrSpec {
    pub alpha: f64,
    /// RBF coefficient; `None` means `1 / n_features`.
    pub rbf_gamma: Option<f64>,
}

impl Default for KrrSpec {
    fn default() -> Self {
        KrrSpec {
            alpha: 0.1,
            rbf_gamma: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestSpec {
    pub n_trees: usize,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestSpec {
    fn default() -> Self {
        ForestSpec {
            n_trees: 10,
            min_samples_split: 2,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtSpec {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for GbdtSpec {
    fn default() -> Self {
        GbdtSpec {
            n_stages: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaMartSpec {
    #[serde(flatten)]
    pub params: LambdaMartParams,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineSpec {
    pub seed: u64,
}

/// Declarative learner choice with hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Lasso(LassoSpec),
    Krr(KrrSpec),
    #[serde(alias = "rf")]
    RandomForest(ForestSpec),
    Gbdt(GbdtSpec),
    #[serde(alias = "lambdamart")]
    LambdaMart(LambdaMartSpec),
    Baseline(BaselineSpec),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::RandomForest(ForestSpec::default())
    }
}

impl ModelSpec {
    /// Spec with default hyperparameters for a model name.
    pub fn named(name: &str) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "lasso" => ModelSpec::Lasso(LassoSpec::default()),
            "krr" => ModelSpec::Krr(KrrSpec::default()),
            "rf" | "random_forest" => ModelSpec::RandomForest(ForestSpec::default()),
            "gbdt" => ModelSpec::Gbdt(GbdtSpec::default()),
            "lambdamart" | "lambda_mart" => ModelSpec::LambdaMart(LambdaMartSpec::default()),
            "baseline" => ModelSpec::Baseline(BaselineSpec::default()),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Lasso(_) => "lasso",
            ModelSpec::Krr(_) => "krr",
            ModelSpec::RandomForest(_) => "random_forest",
            ModelSpec::Gbdt(_) => "gbdt",
            ModelSpec::LambdaMart(_) => "lambda_mart",
            ModelSpec::Baseline(_) => "baseline",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ModelSpec::Lasso(_) | ModelSpec::Krr(_) => None,
            ModelSpec::RandomForest(s) => Some(s.seed),
            ModelSpec::Gbdt(s) => Some(s.seed),
            ModelSpec::LambdaMart(s) => Some(s.seed),
            ModelSpec::Baseline(s) => Some(s.seed),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ModelSpec::Lasso(_) | ModelSpec::Krr(_) => {}
            ModelSpec::RandomForest(s) => s.seed = seed,
            ModelSpec::Gbdt(s) => s.seed = seed,
            ModelSpec::LambdaMart(s) => s.seed = seed,
            ModelSpec::Baseline(s) => s.seed = seed,
        }
        self
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let check = |name: &'static str, value: f64, ok: bool| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(LearnError::InvalidHyper { name, value })
            }
        };
        match self {
            ModelSpec::Lasso(s) => check("alpha", s.alpha, s.alpha >= 0.0),
            ModelSpec::Krr(s) => {
                check("alpha", s.alpha, s.alpha >= 0.0)?;
                match s.rbf_gamma {
                    Some(g) => check("rbf_gamma", g, g > 0.0),
                    None => Ok(()),
                }
            }
            ModelSpec::RandomForest(s) => {
                check("n_trees", s.n_trees as f64, s.n_trees > 0)?;
                check(
                    "min_samples_split",
                    s.min_samples_split as f64,
                    s.min_samples_split >= 2,
                )
            }
            ModelSpec::Gbdt(s) => {
                check("learning_rate", s.learning_rate, s.learning_rate > 0.0)?;
                check("max_depth", s.max_depth as f64, s.max_depth > 0)?;
                check(
                    "min_samples_split",
                    s.min_samples_split as f64,
                    s.min_samples_split >= 2,
                )
            }
            ModelSpec::LambdaMart(s) => {
                let p = &s.params;
                check("learning_rate", p.learning_rate, p.learning_rate > 0.0)?;
                check("min_split_loss", p.min_split_loss, p.min_split_loss >= 0.0)?;
                check("lambda", p.lambda, p.lambda >= 0.0)?;
                check("sigma", p.sigma, p.sigma > 0.0)?;
                check("max_depth", p.max_depth as f64, p.max_depth > 0)?;
                match p.ndcg_truncation {
                    Some(k) => check("ndcg_truncation", k as f64, k > 0),
                    None => Ok(()),
                }
            }
            ModelSpec::Baseline(_) => Ok(()),
        }
    }

    /// Stable cache key.
    pub fn key(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "snake_case", bound = "T: Scalar")]
pub enum FittedModel<T> {
    Lasso(LassoModel<T>),
    Krr(KrrModel<T>),
    RandomForest(ForestModel<T>),
    Gbdt(GbdtModel<T>),
    LambdaMart(LambdaMartModel<T>),
    Baseline { seed: u64 },
}

/// Uniform scores in [0, 1) for `n` rows, fixed by `seed`.
pub fn random_scores(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

pub fn fit<T: Scalar>(spec: &ModelSpec, data: &Dataset<T>) -> Result<FittedModel<T>, LearnError> {
    spec.validate()?;
    if data.is_empty() {
        return Err(LearnError::Empty);
    }
    let (x, y) = (data.x.view(), data.y.view());
    Ok(match spec {
        ModelSpec::Lasso(s) => FittedModel::Lasso(LassoModel::fit(x, y, T::of(s.alpha))?),
        ModelSpec::Krr(s) => FittedModel::Krr(KrrModel::fit(x, y, T::of(s.alpha), s.rbf_gamma.map(T::of))?),
        ModelSpec::RandomForest(s) => {
            let params = TreeParams {
                max_depth: s.max_depth,
                min_samples_split: s.min_samples_split,
                ..TreeParams::default()
            };
            FittedModel::RandomForest(ForestModel::fit(x, y, s.n_trees, params, s.bootstrap, s.seed))
        }
        ModelSpec::Gbdt(s) => {
            let params = TreeParams {
                max_depth: Some(s.max_depth),
                min_samples_split: s.min_samples_split,
                ..TreeParams::default()
            };
            FittedModel::Gbdt(GbdtModel::fit(x, y, s.n_stages, T::of(s.learning_rate), params))
        }
        ModelSpec::LambdaMart(s) => {
            FittedModel::LambdaMart(LambdaMartModel::fit(x, y, data.groups.as_deref(), &s.params))
        }
        ModelSpec::Baseline(s) => FittedModel::Baseline { seed: s.seed },
    })
}

impl<T: Scalar> FittedModel<T> {
    pub fn predict(&self, x: ArrayView2<T>) -> Array1<T> {
        match self {
            FittedModel::Lasso(m) => m.predict(x),
            FittedModel::Krr(m) => m.predict(x),
            FittedModel::RandomForest(m) => m.predict(x),
            FittedModel::Gbdt(m) => m.predict(x),
            FittedModel::LambdaMart(m) => m.predict(x),
            FittedModel::Baseline { seed } => random_scores(x.nrows(), *seed).into_iter().map(T::of).collect(),
        }
    }

    /// Impurity-decrease importance; forests only.
    pub fn feature_importance(&self) -> Option<Vec<T>> {
        match self {
            FittedModel::RandomForest(m) => Some(m.feature_importance()),
            _ => None,
        }
    }
}

/// What `model.json` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SavedModel<T> {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub model: FittedModel<T>,
}

impl<T: Scalar> SavedModel<T> {
    pub fn to_json(&self) -> Result<String, LearnError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, LearnError> {
        Ok(serde_json::from_str(s)?)
    }
}
