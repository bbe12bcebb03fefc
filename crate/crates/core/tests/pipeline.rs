use std::collections::HashSet;
use std::sync::OnceLock;

use storeplace::demand::Target;
use storeplace::eval::{
    actual_ranking, feature_context, feature_rows, importance_report, leave_brand_out_eval, leave_brand_out_split,
    random_baseline, rank_centers, run_pipeline, specific_split_eval, train_category_model, CityData, EvalError,
    FeatureRow, Metric, ModelSource, PipelineParams, Status, BASELINE_REPEATS,
};
use storeplace::features::FeatureContext;
use storeplace::geo::haversine_m;
use storeplace::ingest::synth::{generate_city, CityConfig, SyntheticCity};
use storeplace::learners::{FittedModel, ModelSpec};
use storeplace::to_json;

const CATEGORY: &str = "coffee-shop";

fn city() -> &'static (SyntheticCity, CityData) {
    static CITY: OnceLock<(SyntheticCity, CityData)> = OnceLock::new();
    CITY.get_or_init(|| {
        let city = generate_city(&CityConfig::default()).unwrap();
        let data = CityData::from_synthetic(&city);
        (city, data)
    })
}

fn ctx() -> &'static FeatureContext {
    static CTX: OnceLock<FeatureContext> = OnceLock::new();
    CTX.get_or_init(|| feature_context(&city().1, CATEGORY, &PipelineParams::default()).unwrap())
}

fn spec(name: &str) -> ModelSpec {
    ModelSpec::named(name).unwrap()
}

#[test]
fn test_brand_never_in_training() {
    let (train, test) = leave_brand_out_split(ctx(), CATEGORY, "Starbucks");
    assert_eq!(test.len(), 40);
    assert!(test.iter().all(|p| p.has_brand("Starbucks")));
    let train_ids: HashSet<&str> = train.iter().map(|p| p.id.as_str()).collect();
    assert!(test.iter().all(|p| !train_ids.contains(p.id.as_str())));
    assert_eq!(train.len(), 25 + 260);
}

#[test]
fn forest_beats_random_on_planted_city() {
    let r = leave_brand_out_eval(ctx(), CATEGORY, "Starbucks", &spec("rf"), 10, 1).unwrap();
    assert!(r.ndcg > r.baseline.ndcg + 0.15, "{} vs {}", r.ndcg, r.baseline.ndcg);
    assert!((0.0..=1.0).contains(&r.nsd));
}

#[test]
fn baseline_spec_delegates_to_random_baseline() {
    let r = leave_brand_out_eval(ctx(), CATEGORY, "Costa", &spec("baseline"), 10, 9).unwrap();
    let (_, test) = leave_brand_out_split(ctx(), CATEGORY, "Costa");
    let actual = actual_ranking(ctx(), &test).unwrap();
    assert_eq!(
        r.ndcg,
        random_baseline(&actual, 10, Metric::Ndcg, BASELINE_REPEATS, 9).unwrap()
    );
    assert_eq!(
        r.nsd,
        random_baseline(&actual, 10, Metric::Nsd, BASELINE_REPEATS, 9).unwrap()
    );
}

#[test]
fn input_order_leaves_report_unchanged() {
    let (_, data) = city();
    let mut reversed = data.clone();
    reversed.pois.reverse();
    let ctx2 = feature_context(&reversed, CATEGORY, &PipelineParams::default()).unwrap();
    for name in ["lasso", "gbdt"] {
        let a = leave_brand_out_eval(ctx(), CATEGORY, "Starbucks", &spec(name), 10, 4).unwrap();
        let b = leave_brand_out_eval(&ctx2, CATEGORY, "Starbucks", &spec(name), 10, 4).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn short_brand_is_an_error() {
    let r = leave_brand_out_eval(ctx(), CATEGORY, "Costa", &spec("rf"), 30, 0);
    assert!(matches!(r, Err(EvalError::TooFewItems { have: 25, need: 30, .. })));
}

#[test]
fn specific_split_is_seeded_and_averages_repeats() {
    let a = specific_split_eval(ctx(), "Starbucks", &spec("rf"), 5, 0.2, 1, 3).unwrap();
    let b = specific_split_eval(ctx(), "Starbucks", &spec("rf"), 5, 0.2, 1, 3).unwrap();
    assert_eq!(a, b);
    let r = specific_split_eval(ctx(), "Starbucks", &spec("rf"), 5, 0.2, 10, 3).unwrap();
    assert_eq!(r.repeats.len(), 10);
    assert_eq!(r.n_items, 8);
    let mean = r.repeats.iter().map(|x| x.ndcg).sum::<f64>() / 10.0;
    assert_eq!(r.ndcg, mean);
    assert!(r.repeats.iter().enumerate().all(|(i, x)| x.repeat == i));
    assert!(r.ndcg > r.baseline.ndcg);
}

#[test]
fn best_planted_hotspot_ranks_first() {
    let (city, data) = city();
    let target = Target::Category(CATEGORY.into());
    let r = run_pipeline(
        data,
        &target,
        &PipelineParams::default(),
        ModelSource::Train(&spec("rf")),
        0,
    )
    .unwrap();
    assert_eq!(r.status, Status::Ok);
    let best = city
        .manifest
        .hotspots
        .iter()
        .max_by(|a, b| a.planted_score.total_cmp(&b.planted_score))
        .unwrap();
    let top = r.ranking[0].center;
    let d = haversine_m(
        storeplace::geo::GeoPoint {
            lat: top.lat,
            lng: top.lng,
        },
        storeplace::geo::GeoPoint {
            lat: best.lat,
            lng: best.lng,
        },
    );
    assert!(d < 300.0, "top candidate {d} m from best hotspot");
    let again = run_pipeline(
        data,
        &target,
        &PipelineParams::default(),
        ModelSource::Train(&spec("rf")),
        0,
    )
    .unwrap();
    assert_eq!(to_json(&r.ranking), to_json(&again.ranking));
}

#[test]
fn no_demand_gives_empty_ranking() {
    let (_, data) = city();
    let mut quiet = data.clone();
    quiet.queries.clear();
    let r = run_pipeline(
        &quiet,
        &Target::Category(CATEGORY.into()),
        &PipelineParams::default(),
        ModelSource::Train(&spec("rf")),
        0,
    )
    .unwrap();
    assert_eq!(r.status, Status::NoDemand);
    assert!(r.ranking.is_empty());
}

#[test]
fn positive_rescaling_keeps_candidate_order() {
    let (_, data) = city();
    let target = Target::Category(CATEGORY.into());
    let r = run_pipeline(
        data,
        &target,
        &PipelineParams::default(),
        ModelSource::Train(&spec("lasso")),
        0,
    )
    .unwrap();
    let mut model = train_category_model(ctx(), CATEGORY, &spec("lasso"), 0).unwrap();
    let FittedModel::Lasso(m) = &mut model.model else {
        panic!()
    };
    m.coef.mapv_inplace(|c| c * 3.5);
    m.intercept *= 3.5;
    let scaled = rank_centers(ctx(), &r.demand.centers, &model).unwrap();
    let order =
        |v: &[storeplace::eval::RankedCenter]| v.iter().map(|c| (c.center.lat, c.center.lng)).collect::<Vec<_>>();
    assert_eq!(order(&r.ranking), order(&scaled));
}

#[test]
fn fitted_model_path_matches_training_path() {
    let (_, data) = city();
    let target = Target::Category(CATEGORY.into());
    let trained = run_pipeline(
        data,
        &target,
        &PipelineParams::default(),
        ModelSource::Train(&spec("gbdt")),
        5,
    )
    .unwrap();
    let model = train_category_model(ctx(), CATEGORY, &spec("gbdt"), 5).unwrap();
    let loaded = storeplace::SavedModel::from_json(&model.to_json().unwrap()).unwrap();
    let reused = run_pipeline(
        data,
        &target,
        &PipelineParams::default(),
        ModelSource::Fitted(&loaded),
        5,
    )
    .unwrap();
    assert_eq!(to_json(&trained.ranking), to_json(&reused.ranking));
}

#[test]
fn baseline_ranking_is_reproducible() {
    let (_, data) = city();
    let target = Target::Category(CATEGORY.into());
    let run = |seed| {
        run_pipeline(
            data,
            &target,
            &PipelineParams::default(),
            ModelSource::Train(&spec("baseline")),
            seed,
        )
        .unwrap()
    };
    assert_eq!(run(2), run(2));
}

#[test]
fn importance_sums_to_one() {
    let r = importance_report(ctx(), CATEGORY, &spec("rf"), 0).unwrap();
    let total: f64 = r.features.iter().map(|f| f.weight).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert_eq!(r.features.len(), 7);
    assert!(matches!(
        importance_report(ctx(), CATEGORY, &spec("lasso"), 0),
        Err(EvalError::Unsupported(_))
    ));
}

#[test]
fn features_csv_layout() {
    let (_, data) = city();
    let target = Target::Category(CATEGORY.into());
    let r = run_pipeline(
        data,
        &target,
        &PipelineParams::default(),
        ModelSource::Train(&spec("rf")),
        0,
    )
    .unwrap();
    let rows = feature_rows(ctx(), CATEGORY, &r.demand.centers);
    let mut buf = Vec::new();
    FeatureRow::write_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "poi_or_center_id,dist_center_m,traffic_stations,poi_density,area_cat_popularity,competition,area_popularity,estate_price,target"
    );
    assert_eq!(lines.clone().count(), 325 + r.demand.centers.len());
    assert!(lines.last().unwrap().starts_with("center-"));
    assert!(text.lines().last().unwrap().ends_with(','));
}
