//! Domain types shared by the rest of the engine.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::NOT_SPECIFIED;

#[derive(Debug, Clone, PartialEq)]
pub enum GeoError {
    InvalidCoordinate { lon: f64, lat: f64 },
    DegenerateRing(usize),
    InvalidBoundingBox,
    InvalidColor(String),
    EmptyField(&'static str),
    ReservedFacetValue(String),
}

impl fmt::Display for GeoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeoError::InvalidCoordinate { lon, lat } => {
                write!(f, "coordinate out of range: lon {lon}, lat {lat}")
            }
            GeoError::DegenerateRing(n) => {
                write!(f, "polygon ring needs at least 3 vertices, got {n}")
            }
            GeoError::InvalidBoundingBox => {
                f.write_str("bounding box must satisfy south < north and west < east")
            }
            GeoError::InvalidColor(c) => write!(f, "invalid color {c:?}, expected #RRGGBB"),
            GeoError::EmptyField(name) => write!(f, "field `{name}` must not be empty"),
            GeoError::ReservedFacetValue(key) => {
                write!(f, "facet `{key}` has an empty or reserved value")
            }
        }
    }
}

impl core::error::Error for GeoError {}

/// A WGS84 position in degrees. Serialized as `[lon, lat]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub lon: f64,
    pub lat: f64,
}

impl Point {
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        let p = Point { lon, lat };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        let ok = self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat);
        if ok {
            Ok(())
        } else {
            Err(GeoError::InvalidCoordinate {
                lon: self.lon,
                lat: self.lat,
            })
        }
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.lon, self.lat].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [lon, lat] = <[f64; 2]>::deserialize(d)?;
        Point::new(lon, lat).map_err(serde::de::Error::custom)
    }
}

/// Item geometry. Polygon rings are stored open: the first vertex is not
/// repeated at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "coords", rename_all = "lowercase")]
#[serde(try_from = "RawGeometry")]
pub enum Geometry {
    Point(Point),
    Polygon(Vec<Point>),
}

#[derive(Deserialize)]
#[serde(tag = "type", content = "coords", rename_all = "lowercase")]
enum RawGeometry {
    Point(Point),
    Polygon(Vec<Point>),
}

impl TryFrom<RawGeometry> for Geometry {
    type Error = GeoError;

    fn try_from(raw: RawGeometry) -> Result<Self, GeoError> {
        match raw {
            RawGeometry::Point(p) => Ok(Geometry::Point(p)),
            RawGeometry::Polygon(ring) => Geometry::polygon(ring),
        }
    }
}

impl Geometry {
    /// Builds a polygon, dropping a closing vertex equal to the first one.
    pub fn polygon(mut ring: Vec<Point>) -> Result<Self, GeoError> {
        if ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(GeoError::DegenerateRing(ring.len()));
        }
        for p in &ring {
            p.validate()?;
        }
        Ok(Geometry::Polygon(ring))
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        match self {
            Geometry::Point(p) => p.validate(),
            Geometry::Polygon(ring) => {
                if ring.len() < 3 {
                    return Err(GeoError::DegenerateRing(ring.len()));
                }
                ring.iter().try_for_each(Point::validate)
            }
        }
    }

    pub fn representative_point(&self) -> Point {
        representative_point(self)
    }
}

/// The point used for clustering, bbox filtering and polygon counting:
/// the point itself, or the arithmetic mean of a polygon's vertices.
pub fn representative_point(geometry: &Geometry) -> Point {
    match geometry {
        Geometry::Point(p) => *p,
        Geometry::Polygon(ring) => {
            let n = ring.len() as f64;
            let (lon, lat) = ring
                .iter()
                .fold((0.0, 0.0), |(lon, lat), p| (lon + p.lon, lat + p.lat));
            Point {
                lon: lon / n,
                lat: lat / n,
            }
        }
    }
}

/// Axis-aligned box in degrees. Boxes crossing the antimeridian are not
/// representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBoundingBox")]
pub struct BoundingBox {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

#[derive(Deserialize)]
struct RawBoundingBox {
    south: f64,
    west: f64,
    north: f64,
    east: f64,
}

impl TryFrom<RawBoundingBox> for BoundingBox {
    type Error = GeoError;

    fn try_from(r: RawBoundingBox) -> Result<Self, GeoError> {
        BoundingBox::new(r.south, r.west, r.north, r.east)
    }
}

impl BoundingBox {
    pub fn new(south: f64, west: f64, north: f64, east: f64) -> Result<Self, GeoError> {
        Point::new(west, south)?;
        Point::new(east, north)?;
        if south < north && west < east {
            Ok(BoundingBox {
                south,
                west,
                north,
                east,
            })
        } else {
            Err(GeoError::InvalidBoundingBox)
        }
    }

    /// Boundary points are inside.
    pub fn contains(&self, p: Point) -> bool {
        bbox_contains(self, p)
    }
}

pub fn bbox_contains(bbox: &BoundingBox, p: Point) -> bool {
    bbox.west <= p.lon && p.lon <= bbox.east && bbox.south <= p.lat && p.lat <= bbox.north
}

/// 24-bit RGB color, written as `#RRGGBB`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub [u8; 3]);

impl FromStr for Rgb {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self, GeoError> {
        let bad = || GeoError::InvalidColor(String::from(s));
        let hex = s.strip_prefix('#').ok_or_else(bad)?;
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(bad());
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| bad());
        Ok(Rgb([byte(0)?, byte(2)?, byte(4)?]))
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b] = self.0;
        write!(f, "#{r:02X}{g:02X}{b:02X}")
    }
}

impl Serialize for Rgb {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A data category with its presentation and the raw tag that selects its
/// members (`tag_key=tag_value`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: String,
    pub label: String,
    pub color: Rgb,
    pub icon: String,
    pub tag_key: String,
    pub tag_value: String,
}

impl Category {
    pub fn validate(&self) -> Result<(), GeoError> {
        if self.id.is_empty() {
            return Err(GeoError::EmptyField("id"));
        }
        if self.tag_key.is_empty() {
            return Err(GeoError::EmptyField("tag_key"));
        }
        if self.tag_value.is_empty() {
            return Err(GeoError::EmptyField("tag_value"));
        }
        Ok(())
    }

    pub fn tag_predicate(&self) -> (&str, &str) {
        (&self.tag_key, &self.tag_value)
    }
}

/// One mapped entity.
///
/// Facet values are atomic: `"ITALIAN; PIZZA"` is a single value and is
/// never split on separators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoItem")]
pub struct GeoItem {
    pub id: String,
    #[serde(rename = "category")]
    pub category_id: String,
    #[serde(rename = "geom")]
    pub geometry: Geometry,
    pub facets: BTreeMap<String, String>,
    #[serde(rename = "name", default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
}

#[derive(Deserialize)]
struct RawGeoItem {
    id: String,
    category: String,
    geom: Geometry,
    #[serde(default)]
    facets: BTreeMap<String, String>,
    #[serde(default)]
    name: Option<String>,
}

impl TryFrom<RawGeoItem> for GeoItem {
    type Error = GeoError;

    fn try_from(r: RawGeoItem) -> Result<Self, GeoError> {
        let item = GeoItem {
            id: r.id,
            category_id: r.category,
            geometry: r.geom,
            facets: r.facets,
            display_name: r.name,
        };
        item.validate()?;
        Ok(item)
    }
}

impl GeoItem {
    pub fn validate(&self) -> Result<(), GeoError> {
        if self.id.is_empty() {
            return Err(GeoError::EmptyField("id"));
        }
        if self.category_id.is_empty() {
            return Err(GeoError::EmptyField("category"));
        }
        self.geometry.validate()?;
        for (key, value) in &self.facets {
            if key.is_empty() {
                return Err(GeoError::EmptyField("facet key"));
            }
            if value.is_empty() || value == NOT_SPECIFIED {
                return Err(GeoError::ReservedFacetValue(key.clone()));
            }
        }
        Ok(())
    }

    pub fn representative_point(&self) -> Point {
        representative_point(&self.geometry)
    }

    pub fn facet(&self, key: &str) -> Option<&str> {
        self.facets.get(key).map(String::as_str)
    }
}
