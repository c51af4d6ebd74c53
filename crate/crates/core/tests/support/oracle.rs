//! Naive reimplementations of the projection semantics and a second
//! point-in-polygon algorithm, for randomized agreement checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use facetmap_core::projection::{count_in_polygon, point_in_polygon, resolve_projection};
use facetmap_core::{GeoItem, Geometry, Point, ProjectionState, NOT_SPECIFIED};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Signed area test: > 0 when `p` is left of the directed line a -> b.
fn is_left(a: Point, b: Point, p: Point) -> f64 {
    (b.lon - a.lon) * (p.lat - a.lat) - (p.lon - a.lon) * (b.lat - a.lat)
}

/// Winding number; nonzero means inside.
pub fn winding_number(p: Point, ring: &[Point]) -> i32 {
    let mut wn = 0;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        if a.lat <= p.lat {
            if b.lat > p.lat && is_left(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b.lat <= p.lat && is_left(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Star-shaped simple polygon around a random center.
pub fn random_ring(rng: &mut impl Rng) -> Vec<Point> {
    let n = rng.gen_range(3..12);
    let (cx, cy) = (rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7));
    let mut angles: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    angles
        .into_iter()
        .map(|a| {
            let r = rng.gen_range(0.05..0.45);
            Point {
                lon: cx + r * a.cos(),
                lat: cy + r * a.sin(),
            }
        })
        .collect()
}

pub struct Snapshot {
    pub items: Vec<GeoItem>,
    pub categories: Vec<String>,
}

pub fn random_snapshot(rng: &mut impl Rng) -> Snapshot {
    let n_items = rng.gen_range(0..=200);
    let n_facets = rng.gen_range(1..=6);
    let n_values = rng.gen_range(1..=8);
    let categories: Vec<String> = (0..rng.gen_range(1..=3))
        .map(|c| format!("cat{c}"))
        .collect();
    let items = (0..n_items)
        .map(|i| {
            let mut facets = BTreeMap::new();
            for f in 0..n_facets {
                if rng.gen_bool(0.7) {
                    facets.insert(format!("F{f}"), format!("V{}", rng.gen_range(0..n_values)));
                }
            }
            GeoItem {
                id: format!("item{i}"),
                category_id: categories[rng.gen_range(0..categories.len())].clone(),
                geometry: Geometry::Point(Point {
                    lon: rng.gen(),
                    lat: rng.gen(),
                }),
                facets,
                display_name: None,
            }
        })
        .collect();
    Snapshot { items, categories }
}

/// The state as plain data, next to the engine state built from it.
pub struct Constraints {
    pub searched: BTreeSet<String>,
    pub hidden: BTreeSet<String>,
    pub selections: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
}

pub fn random_state(rng: &mut impl Rng, snap: &Snapshot) -> (ProjectionState, Constraints) {
    let mut state = ProjectionState::new("oracle");
    let mut c = Constraints {
        searched: BTreeSet::new(),
        hidden: BTreeSet::new(),
        selections: BTreeMap::new(),
    };
    for cat in &snap.categories {
        if rng.gen_bool(0.2) {
            continue;
        }
        state = state.with_category(cat);
        c.searched.insert(cat.clone());
        if rng.gen_bool(0.15) {
            state = state.set_hidden(cat, true).unwrap();
            c.hidden.insert(cat.clone());
        }
        for _ in 0..rng.gen_range(0..5) {
            let facet = format!("F{}", rng.gen_range(0..6));
            let value = if rng.gen_bool(0.15) {
                NOT_SPECIFIED.to_string()
            } else {
                format!("V{}", rng.gen_range(0..8))
            };
            state = state.toggle_value(cat, &facet, &value).unwrap();
            let set = c
                .selections
                .entry(cat.clone())
                .or_default()
                .entry(facet.clone())
                .or_default();
            if !set.remove(&value) {
                set.insert(value);
            }
            if set.is_empty() {
                c.selections.get_mut(cat).unwrap().remove(&facet);
            }
        }
    }
    (state, c)
}

/// { x in E_C | for every constrained facet f: f(x) in S_f }, with an
/// absent facet reading as NOT SPECIFIED.
pub fn brute_force_visible(items: &[GeoItem], c: &Constraints) -> Vec<String> {
    let mut out = Vec::new();
    for item in items {
        if !c.searched.contains(&item.category_id) || c.hidden.contains(&item.category_id) {
            continue;
        }
        let empty = BTreeMap::new();
        let sel = c.selections.get(&item.category_id).unwrap_or(&empty);
        let mut ok = true;
        for (facet, allowed) in sel {
            let value = item
                .facets
                .get(facet)
                .map(String::as_str)
                .unwrap_or(NOT_SPECIFIED);
            if !allowed.contains(value) {
                ok = false;
            }
        }
        if ok {
            out.push(item.id.clone());
        }
    }
    out
}

/// Compares `point_in_polygon` with the winding number on random star
/// polygons.
pub fn check_point_in_polygon(seed: u64, polygons: usize, points: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..polygons {
        let ring = random_ring(&mut rng);
        for _ in 0..points {
            let p = Point {
                lon: rng.gen(),
                lat: rng.gen(),
            };
            if point_in_polygon(p, &ring) != (winding_number(p, &ring) != 0) {
                return Err(format!("disagreement at {p:?} for ring {ring:?}"));
            }
        }
    }
    Ok(())
}

/// Runs `rounds` random snapshots through `resolve_projection` and
/// `count_in_polygon` and compares with the brute-force versions.
pub fn check_snapshots(seed: u64, rounds: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for round in 0..rounds {
        let snap = random_snapshot(&mut rng);
        let (state, constraints) = random_state(&mut rng, &snap);
        let engine: Vec<String> = resolve_projection(&snap.items, &state)
            .into_iter()
            .map(|(i, _)| i.id.clone())
            .collect();
        let oracle = brute_force_visible(&snap.items, &constraints);
        if engine != oracle {
            return Err(format!(
                "round {round}: engine {engine:?} vs oracle {oracle:?}"
            ));
        }

        let ring = random_ring(&mut rng);
        let visible: BTreeSet<&String> = oracle.iter().collect();
        let expected = snap
            .items
            .iter()
            .filter(|i| visible.contains(&i.id))
            .filter(|i| winding_number(i.representative_point(), &ring) != 0)
            .count();
        let counted = count_in_polygon(&snap.items, &state, &ring);
        if counted != expected {
            return Err(format!(
                "round {round}: counted {counted}, expected {expected}"
            ));
        }
    }
    Ok(())
}
