use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use storeplace::demand::{cluster, distance_score, retention_score, supply_score, MeanShiftConfig};
use storeplace::eval::{ndcg_at_k, nsd_at_k, RankedList};
use storeplace::geo::{haversine_m, Disc, GeoPoint, LocalProjection, SpatialIndex};
use storeplace::ingest::{integrate_visits, parse_queries, write_queries, Poi, QueryKind, QueryRecord, WifiRecord};
use storeplace::learners::{coordinate_descent, kkt_violation, RegressionTree, TreeParams};

const ORIGIN: GeoPoint = GeoPoint { lat: 39.9, lng: 116.4 };

fn local(xy: (f64, f64)) -> GeoPoint {
    LocalProjection::new(ORIGIN).unproject(xy.0, xy.1)
}

fn city_point() -> impl Strategy<Value = GeoPoint> {
    (-8000.0..8000.0f64, -8000.0..8000.0f64).prop_map(local)
}

fn any_point() -> impl Strategy<Value = GeoPoint> {
    (-80.0..80.0f64, -179.0..179.0f64).prop_map(|(lat, lng)| GeoPoint { lat, lng })
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("i{i:03}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn disc_query_equals_linear_scan(
        points in prop::collection::vec(city_point(), 0..600),
        center in city_point(),
        radius in 10.0..4000.0f64,
        cell in 200.0..3000.0f64,
    ) {
        let index = SpatialIndex::from_points(&points, cell).unwrap();
        let disc = Disc::new(center, radius).unwrap();
        let got = index.query_disc(&disc);
        let want: Vec<usize> = (0..points.len()).filter(|&i| haversine_m(points[i], center) <= radius).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn index_ignores_insertion_order(
        points in prop::collection::vec(city_point(), 1..200),
        center in city_point(),
        radius in 10.0..4000.0f64,
        rot in 0usize..200,
    ) {
        let items: Vec<(usize, GeoPoint)> = points.iter().copied().enumerate().collect();
        let mut rotated = items.clone();
        rotated.rotate_left(rot % items.len());
        let a = SpatialIndex::build(&items, 1000.0).unwrap();
        let b = SpatialIndex::build(&rotated, 1000.0).unwrap();
        let disc = Disc::new(center, radius).unwrap();
        prop_assert_eq!(a.query_disc(&disc), b.query_disc(&disc));
        prop_assert_eq!(a.k_nearest(center, 5, radius), b.k_nearest(center, 5, radius));
    }

    #[test]
    fn haversine_is_a_metric(a in any_point(), b in any_point(), c in any_point()) {
        let ab = haversine_m(a, b);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, haversine_m(b, a));
        let slack = 1e-6 * (ab + haversine_m(b, c)).max(1.0);
        prop_assert!(haversine_m(a, c) <= ab + haversine_m(b, c) + slack);
    }

    #[test]
    fn retention_scores_bounded_and_monotone(
        d in 0.0..5000.0f64,
        dd in 0.0..500.0f64,
        n in 0usize..40,
        alpha in 0.0..=1.0f64,
    ) {
        let s = retention_score(d, n, 300.0, 0.5, alpha);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!(distance_score(d + dd, 300.0) >= distance_score(d, 300.0));
        prop_assert!(supply_score(n + 1, 0.5) <= supply_score::<f64>(n, 0.5));
        prop_assert!(retention_score(d + dd, n, 300.0, 0.5, alpha) >= s);
        prop_assert!(retention_score(d, n + 1, 300.0, 0.5, alpha) <= s);
    }

    #[test]
    fn integration_is_order_invariant(
        raw in prop::collection::vec((0u8..6, 0i64..400_000, 0u8..5), 0..150),
        rot in 0usize..150,
    ) {
        let pois: Vec<Poi> = (0..4).map(|i| Poi {
            id: format!("p{i}"),
            name: String::new(),
            location: ORIGIN,
            category_l1: "c".into(),
            category_l2: "c".into(),
            brand: None,
            unit_price: None,
        }).collect();
        let wifi: Vec<WifiRecord> = raw.iter().map(|&(u, t, p)| WifiRecord {
            user_id: format!("u{u}"),
            timestamp: 1_400_000_000 + t,
            poi_id: format!("p{p}"),
        }).collect();
        let mut shuffled = wifi.clone();
        if !shuffled.is_empty() {
            let r = rot % shuffled.len();
            shuffled.rotate_left(r);
            shuffled.reverse();
        }
        let a = integrate_visits(&wifi, &pois, 8 * 3600);
        let b = integrate_visits(&shuffled, &pois, 8 * 3600);
        prop_assert_eq!(&a, &b);
        let raw_pairs: BTreeSet<(&str, &str)> = wifi.iter().map(|w| (w.poi_id.as_str(), w.user_id.as_str())).collect();
        for (poi, count) in a.visits.iter() {
            let users = raw_pairs.iter().filter(|(p, _)| *p == poi).count() as u64;
            prop_assert!(count >= users);
        }
    }

    #[test]
    fn query_lines_round_trip(
        raw in prop::collection::vec((1i64..2_000_000_000, city_point(), "[a-z]{1,8}", any::<bool>()), 0..40),
    ) {
        let queries: Vec<QueryRecord> = raw.into_iter().enumerate().map(|(i, (ts, origin, kw, route))| QueryRecord {
            user_id: format!("u{i}"),
            timestamp: ts,
            origin,
            keyword: kw,
            target_poi_id: route.then(|| format!("p{i}")),
            kind: if route { QueryKind::Route } else { QueryKind::Nearby },
        }).collect();
        let mut buf = Vec::new();
        write_queries(&mut buf, &queries).unwrap();
        let parsed = parse_queries(buf.as_slice()).unwrap();
        prop_assert_eq!(parsed.rejected, 0);
        prop_assert_eq!(parsed.records, queries);
    }

    #[test]
    fn nsd_symmetric_and_bounded(perm_a in Just((0..15).collect::<Vec<usize>>()).prop_shuffle(),
                                 perm_b in Just((0..15).collect::<Vec<usize>>()).prop_shuffle(),
                                 k in 1usize..=15) {
        let names = ids(15);
        let a = RankedList::new(perm_a.iter().map(|&i| names[i].clone()).collect()).unwrap();
        let b = RankedList::new(perm_b.iter().map(|&i| names[i].clone()).collect()).unwrap();
        let ab = nsd_at_k(&a, &b, k).unwrap();
        prop_assert_eq!(ab, nsd_at_k(&b, &a, k).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn ndcg_depends_only_on_order(
        scores in prop::collection::vec(-100.0..100.0f64, 12),
        k in 1usize..=12,
        scale in 0.01..50.0f64,
        shift in -10.0..10.0f64,
    ) {
        let names = ids(12);
        let actual = RankedList::new(names.clone()).unwrap();
        let pred = RankedList::from_scores(&names, &scores).unwrap();
        let moved: Vec<f64> = scores.iter().map(|s| (s * scale + shift).exp().ln_1p()).collect();
        let pred2 = RankedList::from_scores(&names, &moved).unwrap();
        let v = ndcg_at_k(&pred, &actual, k).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0 + 1e-12);
        if pred.ids() == pred2.ids() {
            prop_assert_eq!(v, ndcg_at_k(&pred2, &actual, k).unwrap());
        }
        let ideal_prefix = pred.top(k).iter().zip(actual.top(k)).all(|(a, b)| a == b);
        prop_assert_eq!(ideal_prefix, (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lasso_meets_subgradient_conditions(
        seed_x in prop::collection::vec(-3.0..3.0f64, 40 * 4),
        w in prop::collection::vec(-2.0..2.0f64, 4),
        alpha in 0.001..1.0f64,
    ) {
        let x = Array2::from_shape_vec((40, 4), seed_x).unwrap();
        let y: Array1<f64> = x.rows().into_iter().enumerate().map(|(i, r)| {
            r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + ((i * 37 % 11) as f64 - 5.0) * 0.1
        }).collect();
        let (coef, _) = coordinate_descent(x.view(), y.view(), alpha, 1e-10, 100_000);
        prop_assert!(kkt_violation(x.view(), y.view(), coef.view(), alpha) < 1e-4);
    }

    #[test]
    fn tree_predictions_stay_in_target_range(
        xs in prop::collection::vec(-5.0..5.0f64, 30 * 2),
        ys in prop::collection::vec(-50.0..50.0f64, 30),
        depth in 1usize..6,
    ) {
        let x = Array2::from_shape_vec((30, 2), xs).unwrap();
        let y = Array1::from(ys);
        let params = TreeParams { max_depth: Some(depth), ..Default::default() };
        let t = RegressionTree::fit(x.view(), y.view(), params);
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(t.root.depth() <= depth);
        for p in t.predict(x.view()) {
            prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn meanshift_conserves_members_and_assigns_nearest(
        pts in prop::collection::vec((-3000.0..3000.0f64, -3000.0..3000.0f64), 1..80),
        bw in 200.0..1500.0f64,
    ) {
        let points: Vec<GeoPoint> = pts.into_iter().map(local).collect();
        let c = cluster(&points, None, bw, &MeanShiftConfig::default()).unwrap();
        prop_assert_eq!(c.centers.iter().map(|c| c.member_count).sum::<usize>(), points.len());
        prop_assert!(c.centers.iter().all(|c| c.member_count > 0));
        for (p, &l) in points.iter().zip(&c.labels) {
            let mine = haversine_m(*p, c.centers[l].location);
            let best = c.centers.iter().map(|c| haversine_m(*p, c.location)).fold(f64::INFINITY, f64::min);
            prop_assert!(mine <= best + 1e-9);
        }
        for pair in c.centers.windows(2) {
            prop_assert!(pair[0].member_count >= pair[1].member_count);
        }
    }
}
