//! Visualization constraints and their resolution.
//!
//! Each searched category carries an opacity, a hidden flag and a set of
//! selected values per facet. Values selected within one facet are
//! alternatives (OR); selections on different facets must all hold (AND).
//! Projection only decides what is drawn: the item list is never modified.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::geo::{GeoItem, Point};
use crate::NOT_SPECIFIED;

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionError {
    UnknownCategory(String),
    InvalidOpacity(f64),
    EmptySelection {
        category_id: String,
        facet_key: String,
    },
    InconsistentSearchList,
}

impl fmt::Display for ProjectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjectionError::UnknownCategory(id) => write!(f, "category {id:?} is not on the map"),
            ProjectionError::InvalidOpacity(o) => write!(f, "opacity must lie in [0, 1], got {o}"),
            ProjectionError::EmptySelection {
                category_id,
                facet_key,
            } => {
                write!(f, "empty selection for {category_id}/{facet_key}")
            }
            ProjectionError::InconsistentSearchList => {
                f.write_str("searched list must name every projected category exactly once")
            }
        }
    }
}

impl core::error::Error for ProjectionError {}

fn check_opacity(opacity: f64) -> Result<f64, ProjectionError> {
    if (0.0..=1.0).contains(&opacity) {
        Ok(opacity)
    } else {
        Err(ProjectionError::InvalidOpacity(opacity))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryProjection {
    pub category_id: String,
    opacity: f64,
    hidden: bool,
    selections: BTreeMap<String, BTreeSet<String>>,
}

impl CategoryProjection {
    pub fn new(category_id: impl Into<String>) -> Self {
        CategoryProjection {
            category_id: category_id.into(),
            opacity: 1.0,
            hidden: false,
            selections: BTreeMap::new(),
        }
    }

    pub fn opacity(&self) -> f64 {
        self.opacity
    }

    pub fn hidden(&self) -> bool {
        self.hidden
    }

    pub fn selections(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.selections
    }

    pub fn is_selected(&self, facet_key: &str, value: &str) -> bool {
        self.selections
            .get(facet_key)
            .is_some_and(|set| set.contains(value))
    }

    fn toggle(&mut self, facet_key: &str, value: &str) {
        let set = self.selections.entry(String::from(facet_key)).or_default();
        if !set.remove(value) {
            set.insert(String::from(value));
        }
        if set.is_empty() {
            self.selections.remove(facet_key);
        }
    }

    fn validate(&self) -> Result<(), ProjectionError> {
        check_opacity(self.opacity)?;
        if let Some((facet, _)) = self.selections.iter().find(|(_, set)| set.is_empty()) {
            return Err(ProjectionError::EmptySelection {
                category_id: self.category_id.clone(),
                facet_key: facet.clone(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Toggle {
    pub facet: String,
    pub value: String,
}

/// A batch of changes to one category, applied atomically.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPatch {
    pub category_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<bool>,
    #[serde(default)]
    pub toggles: Vec<Toggle>,
}

/// Everything that decides what a map shows.
///
/// `searched` keeps side-bar order; every projected category appears in it
/// exactly once. All updates return a new state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProjectionState")]
pub struct ProjectionState {
    pub map_id: String,
    categories: BTreeMap<String, CategoryProjection>,
    searched: Vec<String>,
}

#[derive(Deserialize)]
struct RawProjectionState {
    map_id: String,
    categories: BTreeMap<String, CategoryProjection>,
    searched: Vec<String>,
}

impl TryFrom<RawProjectionState> for ProjectionState {
    type Error = ProjectionError;

    fn try_from(raw: RawProjectionState) -> Result<Self, ProjectionError> {
        let unique: BTreeSet<&String> = raw.searched.iter().collect();
        let consistent = unique.len() == raw.searched.len()
            && raw.searched.len() == raw.categories.len()
            && raw
                .categories
                .iter()
                .all(|(id, c)| unique.contains(id) && c.category_id == *id);
        if !consistent {
            return Err(ProjectionError::InconsistentSearchList);
        }
        raw.categories
            .values()
            .try_for_each(CategoryProjection::validate)?;
        Ok(ProjectionState {
            map_id: raw.map_id,
            categories: raw.categories,
            searched: raw.searched,
        })
    }
}

impl ProjectionState {
    pub fn new(map_id: impl Into<String>) -> Self {
        ProjectionState {
            map_id: map_id.into(),
            categories: BTreeMap::new(),
            searched: Vec::new(),
        }
    }

    pub fn searched(&self) -> &[String] {
        &self.searched
    }

    pub fn category(&self, category_id: &str) -> Option<&CategoryProjection> {
        self.categories.get(category_id)
    }

    pub fn categories(&self) -> impl Iterator<Item = &CategoryProjection> {
        self.searched
            .iter()
            .filter_map(|id| self.categories.get(id))
    }

    /// Appends a category with the default projection. No-op if present.
    pub fn with_category(&self, category_id: &str) -> Self {
        let mut next = self.clone();
        if !next.categories.contains_key(category_id) {
            next.categories.insert(
                String::from(category_id),
                CategoryProjection::new(category_id),
            );
            next.searched.push(String::from(category_id));
        }
        next
    }

    pub fn without_category(&self, category_id: &str) -> Result<Self, ProjectionError> {
        let mut next = self.clone();
        next.categories
            .remove(category_id)
            .ok_or_else(|| ProjectionError::UnknownCategory(String::from(category_id)))?;
        next.searched.retain(|id| id != category_id);
        Ok(next)
    }

    fn update<F>(&self, category_id: &str, f: F) -> Result<Self, ProjectionError>
    where
        F: FnOnce(&mut CategoryProjection) -> Result<(), ProjectionError>,
    {
        let mut next = self.clone();
        let projection = next
            .categories
            .get_mut(category_id)
            .ok_or_else(|| ProjectionError::UnknownCategory(String::from(category_id)))?;
        f(projection)?;
        Ok(next)
    }

    pub fn set_opacity(&self, category_id: &str, opacity: f64) -> Result<Self, ProjectionError> {
        let opacity = check_opacity(opacity)?;
        self.update(category_id, |c| {
            c.opacity = opacity;
            Ok(())
        })
    }

    /// Hiding leaves the opacity untouched.
    pub fn set_hidden(&self, category_id: &str, hidden: bool) -> Result<Self, ProjectionError> {
        self.update(category_id, |c| {
            c.hidden = hidden;
            Ok(())
        })
    }

    /// Selects `value` if it is not selected, deselects it otherwise.
    pub fn toggle_value(
        &self,
        category_id: &str,
        facet_key: &str,
        value: &str,
    ) -> Result<Self, ProjectionError> {
        self.update(category_id, |c| {
            c.toggle(facet_key, value);
            Ok(())
        })
    }

    pub fn apply_patch(&self, patch: &ProjectionPatch) -> Result<Self, ProjectionError> {
        if let Some(opacity) = patch.opacity {
            check_opacity(opacity)?;
        }
        self.update(&patch.category_id, |c| {
            if let Some(opacity) = patch.opacity {
                c.opacity = opacity;
            }
            if let Some(hidden) = patch.hidden {
                c.hidden = hidden;
            }
            for t in &patch.toggles {
                c.toggle(&t.facet, &t.value);
            }
            Ok(())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    pub visible: bool,
    pub opacity: f64,
    pub highlighted_facets: Vec<String>,
}

impl VisibilityResult {
    fn hidden(opacity: f64) -> Self {
        VisibilityResult {
            visible: false,
            opacity,
            highlighted_facets: Vec::new(),
        }
    }
}

/// Whether `item` passes the constraints of its category.
///
/// An item lacking a constrained facet only passes when [`NOT_SPECIFIED`]
/// is among the selected values. Highlighted facets are the constrained
/// facets the item actually carries.
pub fn item_visibility(item: &GeoItem, state: &ProjectionState) -> VisibilityResult {
    let Some(projection) = state.category(&item.category_id) else {
        return VisibilityResult::hidden(0.0);
    };
    if projection.hidden {
        return VisibilityResult::hidden(projection.opacity);
    }
    let mut highlighted = Vec::new();
    for (facet, selected) in &projection.selections {
        match item.facet(facet) {
            Some(value) if selected.contains(value) => highlighted.push(facet.clone()),
            None if selected.contains(NOT_SPECIFIED) => {}
            _ => return VisibilityResult::hidden(projection.opacity),
        }
    }
    VisibilityResult {
        visible: true,
        opacity: projection.opacity,
        highlighted_facets: highlighted,
    }
}

/// Visible items with their rendering, in input order.
pub fn resolve_projection<'a>(
    items: &'a [GeoItem],
    state: &ProjectionState,
) -> Vec<(&'a GeoItem, VisibilityResult)> {
    items
        .iter()
        .map(|item| (item, item_visibility(item, state)))
        .filter(|(_, v)| v.visible)
        .collect()
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    cross == 0.0
        && p.lon >= a.lon.min(b.lon)
        && p.lon <= a.lon.max(b.lon)
        && p.lat >= a.lat.min(b.lat)
        && p.lat <= a.lat.max(b.lat)
}

/// Even-odd ray casting over an open ring. Points on an edge or vertex are
/// inside.
pub fn point_in_polygon(p: Point, ring: &[Point]) -> bool {
    if ring.len() < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = ring.len() - 1;
    for i in 0..ring.len() {
        let (a, b) = (ring[i], ring[j]);
        if on_segment(p, a, b) {
            return true;
        }
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if p.lon < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Items visible under `state` whose representative point lies in `ring`.
pub fn count_in_polygon(items: &[GeoItem], state: &ProjectionState, ring: &[Point]) -> usize {
    items
        .iter()
        .filter(|item| item_visibility(item, state).visible)
        .filter(|item| point_in_polygon(item.representative_point(), ring))
        .count()
}
