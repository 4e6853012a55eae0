//! Map extract documents: road intersections and landmark buildings
//! prepared offline from any map source.
//!
//! ```json
//! {
//!   "version": 1,
//!   "intersections": [
//!     {"id": "main-5th", "corners": [{"lat": 0.0, "lon": 0.0}, ...], "street_bearing_deg": 12.0}
//!   ],
//!   "landmarks": [
//!     {"id": "tower", "geo_tag": {"lat": 0.0, "lon": 0.0}, "footprint": [...]}
//!   ]
//! }
//! ```
//!
//! Intersection corners are clockwise seen from above. Footprints are simple
//! polygons; corner annotations follow their vertex order.

use camloc_core::geodesy::{local_offset, GeoCoordinate};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::schema::{GeoDoc, Versioned};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapIntersection {
    pub id: String,
    pub corners: Vec<GeoDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub street_bearing_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapLandmark {
    pub id: String,
    pub geo_tag: GeoDoc,
    pub footprint: Vec<GeoDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub street_bearing_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapExtract {
    pub version: u32,
    #[serde(default)]
    pub intersections: Vec<MapIntersection>,
    #[serde(default)]
    pub landmarks: Vec<MapLandmark>,
}

impl Versioned for MapExtract {
    fn version(&self) -> u32 {
        self.version
    }
}

fn violation(name: String) -> AppError {
    AppError::Invariant { name }
}

/// Signed shoelace area in the local east/north frame of the first vertex;
/// negative for clockwise polygons.
pub fn signed_area_m2(poly: &[GeoCoordinate]) -> f64 {
    let pts: Vec<(f64, f64)> = poly.iter().map(|&g| local_offset(poly[0], g)).collect();
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        / 2.0
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn segments_cross(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// No two non-adjacent edges cross.
pub fn is_simple(poly: &[GeoCoordinate]) -> bool {
    let pts: Vec<(f64, f64)> = poly.iter().map(|&g| local_offset(poly[0], g)).collect();
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn polygon(list: &[GeoDoc], path: &str) -> AppResult<Vec<GeoCoordinate>> {
    if list.len() < 3 {
        return Err(violation(format!("{path}.min_3")));
    }
    let poly = list
        .iter()
        .enumerate()
        .map(|(i, g)| g.to_core(&format!("{path}[{i}]")))
        .collect::<AppResult<Vec<_>>>()?;
    if !is_simple(&poly) || signed_area_m2(&poly).abs() < 1e-6 {
        return Err(violation(format!("{path}.simple")));
    }
    Ok(poly)
}

impl MapIntersection {
    pub fn corners(&self, path: &str) -> AppResult<Vec<GeoCoordinate>> {
        let poly = polygon(&self.corners, &format!("{path}.corners"))?;
        if signed_area_m2(&poly) > 0.0 {
            return Err(violation(format!("{path}.corners.clockwise")));
        }
        Ok(poly)
    }
}

impl MapLandmark {
    pub fn footprint(&self, path: &str) -> AppResult<Vec<GeoCoordinate>> {
        polygon(&self.footprint, &format!("{path}.footprint"))
    }
}

impl MapExtract {
    /// Checks every entry and id uniqueness.
    pub fn validate(&self) -> AppResult<()> {
        for (i, x) in self.intersections.iter().enumerate() {
            x.corners(&format!("intersections[{i}]"))?;
            if self.intersections[..i].iter().any(|o| o.id == x.id) {
                return Err(violation(format!("intersections[{i}].id.unique")));
            }
        }
        for (i, l) in self.landmarks.iter().enumerate() {
            l.geo_tag.to_core(&format!("landmarks[{i}].geo_tag"))?;
            l.footprint(&format!("landmarks[{i}]"))?;
            if self.landmarks[..i].iter().any(|o| o.id == l.id) {
                return Err(violation(format!("landmarks[{i}].id.unique")));
            }
        }
        Ok(())
    }

    pub fn intersection(&self, id: Option<&str>) -> AppResult<&MapIntersection> {
        pick(&self.intersections, id, |x| &x.id, "intersections")
    }

    pub fn landmark(&self, id: Option<&str>) -> AppResult<&MapLandmark> {
        pick(&self.landmarks, id, |l| &l.id, "landmarks")
    }
}

/// The entry with `id`, or the only entry when no id is given.
fn pick<'a, T>(items: &'a [T], id: Option<&str>, key: impl Fn(&T) -> &String, what: &str) -> AppResult<&'a T> {
    match id {
        Some(id) => items
            .iter()
            .find(|t| key(t) == id)
            .ok_or_else(|| AppError::usage(format!("no {what} entry with id `{id}`"))),
        None if items.len() == 1 => Ok(&items[0]),
        None => Err(AppError::usage(format!(
            "map extract has {} {what} entries; choose one with --id",
            items.len()
        ))),
    }
}

/// Parses and validates a map extract.
pub fn parse_map(bytes: &[u8]) -> AppResult<MapExtract> {
    let m: MapExtract = crate::schema::parse_doc(bytes)?;
    m.validate()?;
    Ok(m)
}
