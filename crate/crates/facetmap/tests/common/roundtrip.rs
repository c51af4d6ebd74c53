//! Round-trip properties for the on-disk formats.

use chrono::{TimeZone, Utc};
use facetmap::ingestion::DatasetSnapshot;
use facetmap::service::{MapDocument, WidgetLayout};
use facetmap::snapshot::{snapshot_from_bytes, snapshot_to_bytes};
use facetmap_core::{BoundingBox, GeoItem, Geometry, Point};
use proptest::prelude::*;

#[path = "../../../core/tests/support/props.rs"]
pub mod props;

fn arb_point() -> impl Strategy<Value = Point> {
    (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(lon, lat)| Point { lon, lat })
}

fn arb_geometry() -> impl Strategy<Value = Geometry> {
    prop_oneof![
        arb_point().prop_map(Geometry::Point),
        prop::collection::vec(arb_point(), 3..8)
            .prop_filter_map("degenerate ring", |ring| { Geometry::polygon(ring).ok() }),
    ]
}

fn arb_snapshot_item(id: usize) -> impl Strategy<Value = GeoItem> {
    let facets = prop::collection::btree_map(
        "[A-Z][a-z]{0,6}( [A-Z][a-z]{0,4})?",
        "[A-Z0-9;_ ]{0,5}[A-Z]",
        0..5,
    );
    (
        facets,
        arb_geometry(),
        prop::option::of("\\PC{1,16}"),
        0u8..3,
    )
        .prop_map(move |(facets, geometry, display_name, cat)| GeoItem {
            id: format!("node/{id}"),
            category_id: format!("cat{cat}"),
            geometry,
            facets,
            display_name,
        })
}

fn arb_dataset() -> impl Strategy<Value = DatasetSnapshot> {
    (0usize..30, 0i64..2_000_000_000)
        .prop_flat_map(|(n, secs)| {
            (
                (0..n).map(arb_snapshot_item).collect::<Vec<_>>(),
                Just(secs),
            )
        })
        .prop_map(|(items, secs)| DatasetSnapshot {
            id: "prop".into(),
            bbox: BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap(),
            created: Utc.timestamp_opt(secs, 0).unwrap(),
            items,
        })
}

pub fn snapshot_round_trip(cases: u32) -> Result<(), String> {
    props::run(cases, arb_dataset(), |snapshot| {
        let bytes = snapshot_to_bytes(&snapshot);
        let back = snapshot_from_bytes(&bytes).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&back, &snapshot);
        prop_assert_eq!(snapshot_to_bytes(&back), bytes);
        Ok(())
    })
}

fn arb_layout() -> impl Strategy<Value = WidgetLayout> {
    prop_oneof![
        Just(WidgetLayout::Checkboxes),
        Just(WidgetLayout::Treemap),
        Just(WidgetLayout::Sunburst),
        Just(WidgetLayout::SlidersOnly),
    ]
}

pub fn map_document_round_trip(cases: u32) -> Result<(), String> {
    let strategy = (
        props::arb_state(),
        arb_layout(),
        "\\PC{0,20}",
        0u64..1000,
        0i64..2_000_000_000,
    );
    props::run(
        cases,
        strategy,
        |(projection, layout, title, version, secs)| {
            let at = Utc.timestamp_opt(secs, 0).unwrap();
            let doc = MapDocument {
                map_id: "m".into(),
                title,
                bbox: BoundingBox::new(45.0, 7.57, 45.14, 7.78).unwrap(),
                snapshot_id: "torino".into(),
                layout,
                projection,
                version,
                created: at,
                updated: at,
            };
            let bytes = serde_json::to_vec_pretty(&doc).unwrap();
            let back: MapDocument = serde_json::from_slice(&bytes).unwrap();
            prop_assert_eq!(&back, &doc);
            prop_assert_eq!(serde_json::to_vec_pretty(&back).unwrap(), bytes);
            Ok(())
        },
    )
}
