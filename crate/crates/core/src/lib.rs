//! Core of the facetmap engine.
//!
//! This crate holds everything that is pure computation over in-memory data:
//!
//! * [`geo`]: items, categories, geometries and bounding boxes.
//! * [`analytics`]: per-facet value histograms, entropy-based exploration
//!   cost, the navigation-quality baseline, facet ranking and widget payloads.
//! * [`projection`]: visualization-constraint state (opacity, hiding, facet
//!   value selections) and its resolution into visible items.
//!
//! The crate is `no_std` and only needs `alloc`. Parsing, persistence and the
//! HTTP service live in the `facetmap` crate.
#![no_std]

extern crate alloc;

pub mod analytics;
pub mod geo;
pub mod projection;

pub use analytics::{
    FacetEntry, FacetStats, NavigationBreakdown, NavigationQualityParams, RankingConfig,
    ValueEntry, ValueHistogram, WidgetPayload,
};
pub use geo::{BoundingBox, Category, GeoError, GeoItem, Geometry, Point, Rgb};
pub use projection::{CategoryProjection, ProjectionError, ProjectionState, VisibilityResult};

/// Sentinel value standing for "facet not present on the item".
///
/// It never appears as a stored facet value; it can be selected as a
/// visualization constraint to keep items that lack a facet.
pub const NOT_SPECIFIED: &str = "NOT SPECIFIED";
