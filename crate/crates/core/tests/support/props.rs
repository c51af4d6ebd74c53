//! Property checks over the core engine, runnable with any case budget.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use facetmap_core::analytics::{
    balance, build_histogram, build_widget_payload, entropy_bits, exploration_cost,
    mean_cardinality, rank_facets,
};
use facetmap_core::projection::{item_visibility, resolve_projection};
use facetmap_core::{GeoItem, Geometry, Point, ProjectionState, RankingConfig, ValueHistogram};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseResult, TestRng, TestRunner};

/// Runs one property with a fixed seed so failures reproduce.
pub fn run<S>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> TestCaseResult,
) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

/// Direct summation with natural logs, independent of the library path.
fn oracle_entropy(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut h = 0.0;
    for &c in counts {
        let p = c as f64 / n as f64;
        h -= p * p.ln();
    }
    h / std::f64::consts::LN_2
}

fn histogram(counts: &[u64], total_extra: u64) -> ValueHistogram {
    let map: BTreeMap<String, u64> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (format!("v{i:03}"), c))
        .collect();
    let specified: u64 = counts.iter().sum();
    ValueHistogram::from_counts("F", map, specified + total_extra).unwrap()
}

pub fn arb_item(id: usize) -> impl Strategy<Value = GeoItem> {
    let facets = prop::collection::btree_map(0u8..4, 0u8..4, 0..4);
    (facets, 0.0f64..1.0, 0.0f64..1.0, 0u8..2).prop_map(move |(facets, lon, lat, cat)| GeoItem {
        id: format!("i{id}"),
        category_id: format!("c{cat}"),
        geometry: Geometry::Point(Point { lon, lat }),
        facets: facets
            .into_iter()
            .map(|(k, v)| (format!("F{k}"), format!("V{v}")))
            .collect(),
        display_name: None,
    })
}

pub fn arb_items() -> impl Strategy<Value = Vec<GeoItem>> {
    (1usize..40).prop_flat_map(|n| (0..n).map(arb_item).collect::<Vec<_>>())
}

pub fn arb_state() -> impl Strategy<Value = ProjectionState> {
    let selections = prop::collection::vec((0u8..2, 0u8..4, 0u8..4), 0..6);
    (selections, any::<bool>(), 0.0f64..=1.0).prop_map(|(toggles, hide_c1, opacity)| {
        let mut s = ProjectionState::new("m")
            .with_category("c0")
            .with_category("c1");
        for (c, f, v) in toggles {
            s = s
                .toggle_value(&format!("c{c}"), &format!("F{f}"), &format!("V{v}"))
                .unwrap();
        }
        if hide_c1 {
            s = s.set_hidden("c1", true).unwrap();
        }
        s.set_opacity("c1", opacity).unwrap()
    })
}

fn visible_ids(items: &[GeoItem], s: &ProjectionState) -> BTreeSet<String> {
    resolve_projection(items, s)
        .into_iter()
        .map(|(i, _)| i.id.clone())
        .collect()
}

pub fn entropy_bounds(cases: u32) -> Result<(), String> {
    run(cases, prop::collection::vec(1u64..500, 1..40), |counts| {
        let h = histogram(&counts, 0);
        let e = entropy_bits(&h);
        let m = counts.len() as f64;
        prop_assert!(e >= 0.0);
        prop_assert!(e <= m.log2() + 1e-9);
        prop_assert!((e - oracle_entropy(&counts)).abs() < 1e-9);
        if counts.iter().all(|&c| c == counts[0]) {
            prop_assert!((e - m.log2()).abs() < 1e-9);
        } else {
            prop_assert!(e < m.log2() - 1e-12);
        }
        Ok(())
    })
}

pub fn cost_scaling(cases: u32) -> Result<(), String> {
    let strategy = (prop::collection::vec(1u64..200, 2..20), 0u64..300, 2u64..10);
    run(cases, strategy, |(counts, extra, k)| {
        let h = histogram(&counts, extra);
        let scaled: Vec<u64> = counts.iter().map(|c| c * k).collect();
        let hk = histogram(&scaled, extra * k);
        prop_assert!((entropy_bits(&h) - entropy_bits(&hk)).abs() < 1e-9);
        let (mc, mck) = (
            mean_cardinality(&h).unwrap(),
            mean_cardinality(&hk).unwrap(),
        );
        prop_assert!((mck - mc * k as f64).abs() < 1e-9 * mck);
        let (c, ck) = (
            exploration_cost(&h).unwrap(),
            exploration_cost(&hk).unwrap(),
        );
        prop_assert!((ck - c / k as f64).abs() < 1e-12);
        Ok(())
    })
}

pub fn balance_bounds(cases: u32) -> Result<(), String> {
    run(cases, prop::collection::vec(1u64..100, 1..30), |counts| {
        let b = balance(&histogram(&counts, 0)).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
        let all_equal = counts.iter().all(|&c| c == counts[0]);
        prop_assert_eq!(b == 1.0, all_equal);
        Ok(())
    })
}

pub fn square_centroid(cases: u32) -> Result<(), String> {
    let strategy = (-170.0f64..170.0, -80.0f64..80.0, 1e-4f64..5.0);
    run(cases, strategy, |(lon, lat, side)| {
        let ring = vec![
            Point::new(lon, lat).unwrap(),
            Point::new(lon + side, lat).unwrap(),
            Point::new(lon + side, lat + side).unwrap(),
            Point::new(lon, lat + side).unwrap(),
        ];
        let c = Geometry::polygon(ring).unwrap().representative_point();
        prop_assert!((c.lon - (lon + side / 2.0)).abs() < 1e-9);
        prop_assert!((c.lat - (lat + side / 2.0)).abs() < 1e-9);
        Ok(())
    })
}

pub fn item_round_trip(cases: u32) -> Result<(), String> {
    run(
        cases,
        (arb_item(7), prop::option::of("[a-zA-Z ]{1,12}")),
        |(item, name)| {
            let item = GeoItem {
                display_name: name,
                ..item
            };
            let json = serde_json::to_string(&item).unwrap();
            let back: GeoItem = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, item);
            Ok(())
        },
    )
}

pub fn ranking_deterministic(cases: u32) -> Result<(), String> {
    run(cases, arb_items(), |items| {
        let items: Vec<GeoItem> = items
            .into_iter()
            .map(|i| GeoItem {
                category_id: "c0".into(),
                ..i
            })
            .collect();
        let cfg = RankingConfig {
            min_coverage: 0.1,
            max_facets: 3,
            ..Default::default()
        };
        let a = rank_facets(&items, &cfg);
        let b = rank_facets(&items, &cfg);
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        prop_assert!(a.len() <= 3);
        let keys: BTreeSet<&String> = items.iter().flat_map(|i| i.facets.keys()).collect();
        for s in &a {
            prop_assert!(keys.contains(&s.facet_key));
            prop_assert!(s.exploration_cost > 0.0 && s.coverage >= 0.1);
        }
        for w in a.windows(2) {
            prop_assert!(w[0].exploration_cost <= w[1].exploration_cost);
        }
        let payload = build_widget_payload("c0", &items, &a, &cfg);
        for f in &payload.facets {
            let h = build_histogram(&items, &f.facet_key);
            prop_assert_eq!(f.values.len() + f.hidden_tail.len(), h.distinct_values());
            let all: Vec<_> = f.values.iter().chain(&f.hidden_tail).collect();
            prop_assert!(all.iter().all(|v| v.count >= 1));
            for w in all.windows(2) {
                prop_assert!(
                    w[0].count > w[1].count
                        || (w[0].count == w[1].count && w[0].value < w[1].value)
                );
            }
        }
        Ok(())
    })
}

pub fn or_growth_and_shrink(cases: u32) -> Result<(), String> {
    run(
        cases,
        (arb_items(), arb_state(), 0u8..4, 0u8..4),
        |(items, s, f, v)| {
            let before = visible_ids(&items, &s);
            let facet = format!("F{f}");
            let value = format!("V{v}");
            let c0 = s.category("c0").unwrap();
            if c0.is_selected(&facet, &value) {
                return Ok(());
            }
            let after = visible_ids(&items, &s.toggle_value("c0", &facet, &value).unwrap());
            if c0.selections().contains_key(&facet) {
                prop_assert!(before.is_subset(&after));
            } else {
                prop_assert!(after.is_subset(&before));
            }
            Ok(())
        },
    )
}

pub fn hiding_keeps_opacity(cases: u32) -> Result<(), String> {
    run(
        cases,
        (arb_items(), arb_state(), 0.0f64..=1.0),
        |(items, s, opacity)| {
            let s = s.set_opacity("c0", opacity).unwrap();
            let hidden = s.set_hidden("c0", true).unwrap();
            prop_assert!(items
                .iter()
                .filter(|i| i.category_id == "c0")
                .all(|i| !item_visibility(i, &hidden).visible));
            let shown = hidden.set_hidden("c0", false).unwrap();
            prop_assert_eq!(shown.category("c0").unwrap().opacity(), opacity);
            prop_assert_eq!(shown.category("c0"), s.category("c0"));
            Ok(())
        },
    )
}

pub fn projection_is_pure(cases: u32) -> Result<(), String> {
    run(cases, (arb_items(), arb_state()), |(items, s)| {
        let copy = items.clone();
        let resolve = || {
            resolve_projection(&items, &s)
                .into_iter()
                .map(|(i, v)| (i.id.clone(), v))
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(resolve(), resolve());
        prop_assert_eq!(&items, &copy);
        Ok(())
    })
}

pub fn state_round_trip(cases: u32) -> Result<(), String> {
    run(cases, arb_state(), |s| {
        let json = serde_json::to_string(&s).unwrap();
        let back: ProjectionState = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, s);
        Ok(())
    })
}

pub type Property = fn(u32) -> Result<(), String>;

pub const ALL: [(&str, Property); 10] = [
    ("entropy bounds", entropy_bounds),
    ("cost scaling", cost_scaling),
    ("balance bounds", balance_bounds),
    ("square centroid", square_centroid),
    ("item round trip", item_round_trip),
    ("ranking determinism", ranking_deterministic),
    ("OR growth / AND shrink", or_growth_and_shrink),
    ("hide keeps opacity", hiding_keeps_opacity),
    ("projection purity", projection_is_pure),
    ("projection state round trip", state_round_trip),
];
