//! Overpass JSON ingestion: raw elements, tag normalization, category
//! assignment and snapshot building.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use chrono::{DateTime, SubsecRound, Utc};
use facetmap_core::{BoundingBox, Category, GeoItem, Geometry, Point, NOT_SPECIFIED};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed JSON at byte {offset} (line {line}, column {column}): {source}")]
    Json {
        offset: usize,
        line: usize,
        column: usize,
        source: serde_json::Error,
    },
    #[error("not an Overpass document: missing \"elements\" array")]
    MissingElements,
    #[error("invalid category mapping: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Byte offset of a serde_json error position (1-based line and column).
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut start = 0;
    for _ in 1..line {
        match bytes[start..].iter().position(|&b| b == b'\n') {
            Some(i) => start += i + 1,
            None => break,
        }
    }
    (start + column.saturating_sub(1)).min(bytes.len())
}

fn json_error(bytes: &[u8], source: serde_json::Error) -> IngestError {
    let (line, column) = (source.line(), source.column());
    IngestError::Json {
        offset: byte_offset(bytes, line, column),
        line,
        column,
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementType {
    Node,
    Way,
    Relation,
}

impl ElementType {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementType::Node => "node",
            ElementType::Way => "way",
            ElementType::Relation => "relation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawCoordinates {
    Point(Point),
    Vertices(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawElement {
    pub element_type: ElementType,
    pub id: i64,
    pub coordinates: RawCoordinates,
    pub tags: BTreeMap<String, String>,
}

impl RawElement {
    /// Closed vertex lists with at least three distinct vertices become
    /// polygons; any other vertex list reduces to the mean of its vertices.
    pub fn geometry(&self) -> Geometry {
        match &self.coordinates {
            RawCoordinates::Point(p) => Geometry::Point(*p),
            RawCoordinates::Vertices(vertices) => {
                let closed = vertices.len() > 3 && vertices.first() == vertices.last();
                if closed {
                    if let Ok(polygon) = Geometry::polygon(vertices.clone()) {
                        return polygon;
                    }
                }
                let n = vertices.len() as f64;
                let (lon, lat) = vertices
                    .iter()
                    .fold((0.0, 0.0), |(x, y), p| (x + p.lon, y + p.lat));
                Geometry::Point(Point {
                    lon: lon / n,
                    lat: lat / n,
                })
            }
        }
    }

    pub fn item_id(&self) -> String {
        format!("{}/{}", self.element_type.as_str(), self.id)
    }
}

/// Result of parsing one Overpass document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedOverpass {
    pub elements: Vec<RawElement>,
    /// Entries skipped for lack of usable coordinates or an unknown type.
    pub dropped: usize,
}

#[derive(Deserialize)]
struct OverpassDocument {
    elements: Option<Vec<OverpassElement>>,
}

#[derive(Deserialize)]
struct LatLon {
    lat: f64,
    lon: f64,
}

#[derive(Deserialize)]
struct OverpassElement {
    #[serde(rename = "type")]
    kind: String,
    id: i64,
    lat: Option<f64>,
    lon: Option<f64>,
    center: Option<LatLon>,
    #[serde(default)]
    geometry: Vec<Option<LatLon>>,
    #[serde(default)]
    tags: BTreeMap<String, String>,
}

impl OverpassElement {
    fn coordinates(&self) -> Option<RawCoordinates> {
        if let (Some(lat), Some(lon)) = (self.lat, self.lon) {
            return Point::new(lon, lat).ok().map(RawCoordinates::Point);
        }
        if !self.geometry.is_empty() {
            let vertices: Option<Vec<Point>> = self
                .geometry
                .iter()
                .map(|v| v.as_ref().and_then(|v| Point::new(v.lon, v.lat).ok()))
                .collect();
            return vertices.map(RawCoordinates::Vertices);
        }
        self.center
            .as_ref()
            .and_then(|c| Point::new(c.lon, c.lat).ok())
            .map(RawCoordinates::Point)
    }
}

/// Parses an Overpass JSON document (`{"elements": [...]}`).
pub fn parse_overpass(bytes: &[u8]) -> Result<ParsedOverpass, IngestError> {
    let doc: OverpassDocument = serde_json::from_slice(bytes).map_err(|e| json_error(bytes, e))?;
    let raw = doc.elements.ok_or(IngestError::MissingElements)?;
    let mut parsed = ParsedOverpass::default();
    for element in raw {
        let element_type = match element.kind.as_str() {
            "node" => ElementType::Node,
            "way" => ElementType::Way,
            "relation" => ElementType::Relation,
            _ => {
                parsed.dropped += 1;
                continue;
            }
        };
        let Some(coordinates) = element.coordinates() else {
            parsed.dropped += 1;
            continue;
        };
        let tags = element
            .tags
            .into_iter()
            .filter(|(k, _)| !k.is_empty())
            .collect();
        parsed.elements.push(RawElement {
            element_type,
            id: element.id,
            coordinates,
            tags,
        });
    }
    Ok(parsed)
}

/// Display form of a raw tag key: lowercased, `:` and `_` turned into
/// spaces, every word capitalized (`addr:city` becomes `Addr City`).
pub fn normalize_tag_key(raw_key: &str) -> String {
    let lowered = raw_key.to_lowercase().replace([':', '_'], " ");
    let words: Vec<String> = lowered
        .split_whitespace()
        .map(|word| {
            let mut chars = word.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        })
        .collect();
    if words.is_empty() {
        raw_key.to_string()
    } else {
        words.join(" ")
    }
}

/// Stored form of a raw tag value: trimmed and uppercased, kept whole
/// (`italian; pizza` becomes `ITALIAN; PIZZA`). Empty values and the
/// missing-value sentinel yield `None`.
pub fn normalize_tag_value(raw_value: &str) -> Option<String> {
    let value = raw_value.trim().to_uppercase();
    if value.is_empty() || value == NOT_SPECIFIED {
        None
    } else {
        Some(value)
    }
}

/// Ordered category list; the first matching predicate wins.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMappingConfig {
    categories: Vec<Category>,
}

impl CategoryMappingConfig {
    pub fn new(categories: Vec<Category>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for category in &categories {
            category
                .validate()
                .map_err(|e| IngestError::Config(e.to_string()))?;
            if !seen.insert(category.id.as_str()) {
                return Err(IngestError::Config(format!(
                    "duplicate category id {:?}",
                    category.id
                )));
            }
        }
        Ok(CategoryMappingConfig { categories })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, IngestError> {
        let categories: Vec<Category> =
            serde_json::from_slice(bytes).map_err(|e| json_error(bytes, e))?;
        Self::new(categories)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        Self::from_json(&std::fs::read(path)?)
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn get(&self, id: &str) -> Option<&Category> {
        self.categories.iter().find(|c| c.id == id)
    }

    /// Categories whose label or id starts with `prefix`, ignoring case,
    /// sorted by label.
    pub fn search_prefix(&self, prefix: &str) -> Vec<&Category> {
        let prefix = prefix.to_lowercase();
        let mut hits: Vec<&Category> = self
            .categories
            .iter()
            .filter(|c| {
                c.label.to_lowercase().starts_with(&prefix)
                    || c.id.to_lowercase().starts_with(&prefix)
            })
            .collect();
        hits.sort_by(|a, b| a.label.cmp(&b.label).then_with(|| a.id.cmp(&b.id)));
        hits
    }
}

pub fn assign_category<'c>(
    element: &RawElement,
    config: &'c CategoryMappingConfig,
) -> Option<&'c Category> {
    config.categories.iter().find(|c| {
        element
            .tags
            .get(&c.tag_key)
            .is_some_and(|v| *v == c.tag_value)
    })
}

/// Converts a categorized element. The category's own tag is not a facet.
/// When two raw keys normalize to the same facet key, the first raw key in
/// byte order wins.
pub fn element_to_item(element: &RawElement, category: &Category) -> GeoItem {
    let mut facets = BTreeMap::new();
    for (key, value) in &element.tags {
        if *key == category.tag_key {
            continue;
        }
        if let Some(value) = normalize_tag_value(value) {
            facets.entry(normalize_tag_key(key)).or_insert(value);
        }
    }
    let display_name = element
        .tags
        .get("name")
        .map(|n| n.trim().to_string())
        .filter(|n| !n.is_empty());
    GeoItem {
        id: element.item_id(),
        category_id: category.id.clone(),
        geometry: element.geometry(),
        facets,
        display_name,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSnapshot {
    pub id: String,
    pub bbox: BoundingBox,
    pub created: DateTime<Utc>,
    pub items: Vec<GeoItem>,
}

impl DatasetSnapshot {
    pub fn items_in_category<'a>(
        &'a self,
        category_id: &'a str,
    ) -> impl Iterator<Item = &'a GeoItem> {
        self.items
            .iter()
            .filter(move |i| i.category_id == category_id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub kept: BTreeMap<String, usize>,
    pub uncategorized: usize,
    pub outside_bbox: usize,
    pub duplicates: usize,
}

impl IngestSummary {
    pub fn total_kept(&self) -> usize {
        self.kept.values().sum()
    }
}

pub fn build_snapshot(
    id: &str,
    elements: &[RawElement],
    config: &CategoryMappingConfig,
    bbox: BoundingBox,
) -> DatasetSnapshot {
    build_snapshot_with_summary(id, elements, config, bbox).0
}

/// Keeps the categorized elements whose representative point lies inside
/// `bbox`, in input order.
pub fn build_snapshot_with_summary(
    id: &str,
    elements: &[RawElement],
    config: &CategoryMappingConfig,
    bbox: BoundingBox,
) -> (DatasetSnapshot, IngestSummary) {
    let mut summary = IngestSummary::default();
    let mut seen = BTreeSet::new();
    let mut items = Vec::new();
    for element in elements {
        let Some(category) = assign_category(element, config) else {
            summary.uncategorized += 1;
            continue;
        };
        let item = element_to_item(element, category);
        if !bbox.contains(item.representative_point()) {
            summary.outside_bbox += 1;
            continue;
        }
        if !seen.insert(item.id.clone()) {
            summary.duplicates += 1;
            continue;
        }
        *summary.kept.entry(category.id.clone()).or_default() += 1;
        items.push(item);
    }
    let snapshot = DatasetSnapshot {
        id: id.to_string(),
        bbox,
        created: Utc::now().trunc_subsecs(0),
        items,
    };
    (snapshot, summary)
}
