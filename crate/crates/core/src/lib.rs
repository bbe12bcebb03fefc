//! Demand-driven store placement.
//!
//! Mines spatial demand from map queries, removes demand already served by
//! existing stores, clusters the remaining gap into candidate locations and
//! ranks them with regression and learning-to-rank models.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod demand;
pub mod eval;
pub mod features;
pub mod geo;
pub mod ingest;
pub mod learners;
pub mod scalar;

pub use scalar::Scalar;

pub type Dataset = learners::Dataset<f64>;
pub type Standardizer = learners::Standardizer<f64>;
pub type FittedModel = learners::FittedModel<f64>;
pub type SavedModel = learners::SavedModel<f64>;
pub type LassoModel = learners::LassoModel<f64>;
pub type KrrModel = learners::KrrModel<f64>;
pub type RegressionTree = learners::RegressionTree<f64>;
pub type ForestModel = learners::ForestModel<f64>;
pub type GbdtModel = learners::GbdtModel<f64>;
pub type LambdaMartModel = learners::LambdaMartModel<f64>;

/// Pretty JSON with a trailing newline; every JSON artifact goes through
/// this so files and HTTP bodies match byte for byte.
pub fn to_json<T: serde::Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s
}
