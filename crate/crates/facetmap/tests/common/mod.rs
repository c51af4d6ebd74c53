#![allow(dead_code)]

pub mod roundtrip;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use facetmap::ingestion::{build_snapshot, parse_overpass, CategoryMappingConfig, DatasetSnapshot};
use facetmap::service::MapService;
use facetmap::snapshot::save_snapshot;
use facetmap_core::{BoundingBox, GeoItem};

pub const TORINO_BBOX: (f64, f64, f64, f64) = (45.00, 7.57, 45.14, 7.78);

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn overpass_path() -> PathBuf {
    fixture("torino_restaurants.overpass.json")
}

pub fn categories_path() -> PathBuf {
    fixture("categories.json")
}

pub fn torino_bbox() -> BoundingBox {
    let (s, w, n, e) = TORINO_BBOX;
    BoundingBox::new(s, w, n, e).unwrap()
}

pub fn config() -> CategoryMappingConfig {
    CategoryMappingConfig::load(&categories_path()).unwrap()
}

pub fn torino_snapshot() -> DatasetSnapshot {
    let bytes = std::fs::read(overpass_path()).unwrap();
    let parsed = parse_overpass(&bytes).unwrap();
    build_snapshot("torino", &parsed.elements, &config(), torino_bbox())
}

pub fn restaurants() -> Vec<GeoItem> {
    torino_snapshot()
        .items_in_category("restaurants")
        .cloned()
        .collect()
}

/// A data directory holding the category config and the Torino snapshot.
pub fn data_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(categories_path(), dir.path().join("categories.json")).unwrap();
    std::fs::create_dir_all(dir.path().join("snapshots")).unwrap();
    save_snapshot(
        &torino_snapshot(),
        &dir.path().join("snapshots/torino.jsonl"),
    )
    .unwrap();
    dir
}

pub fn service(dir: &Path) -> Arc<MapService> {
    Arc::new(MapService::open(dir).unwrap())
}
