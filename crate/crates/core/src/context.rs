//! Coarse map context: road intersections and landmark buildings turned into
//! pixel→geo references and candidate camera locations.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geodesy::{
    absolute_from_one_ref, absolute_from_two_refs, geo_distance_m, local_offset, CandidateLocation, GeoCoordinate,
    PixelGeoRef,
};
use crate::geometry::{camera_position_world, CameraPose, Intrinsics, PixelPoint, WorldPoint};
use crate::sensors::pixel_to_ground;
use crate::{Error, Result};

/// Largest footprint accepted by corner-mode landmark matching.
pub const MAX_FOOTPRINT_VERTICES: usize = 12;

/// Mappings kept after ranking.
pub const TOP_MAPPINGS: usize = 2;

/// Map corners and annotated corner pixels of a road intersection, both clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionContext {
    pub corner_geos: Vec<GeoCoordinate>,
    /// Successive visible corners.
    pub corner_pixels: Vec<PixelPoint>,
    /// Bearing of the street the car is parked along; required with one
    /// visible corner.
    pub street_bearing_deg: Option<f64>,
}

impl IntersectionContext {
    pub fn check(&self) -> Result<()> {
        let n = self.corner_geos.len();
        let v = self.corner_pixels.len();
        if n < 3 {
            return Err(Error::InvariantViolation("intersection.corner_geos.min_3".into()));
        }
        if v == 0 || v > n {
            return Err(Error::InvariantViolation("intersection.corner_pixels.count".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandmarkMode {
    FaceCenter,
    Corner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkContext {
    pub geo_tag: GeoCoordinate,
    /// Simple polygon; corner annotations follow its vertex order.
    pub footprint: Vec<GeoCoordinate>,
    pub mode: LandmarkMode,
    pub annotated_pixels: Vec<PixelPoint>,
    /// Required for face-center mode and for a single annotated corner.
    pub street_bearing_deg: Option<f64>,
}

impl LandmarkContext {
    pub fn check(&self) -> Result<()> {
        if self.footprint.len() < 3 {
            return Err(Error::InvariantViolation("landmark.footprint.min_3".into()));
        }
        if self.annotated_pixels.is_empty() {
            return Err(Error::InvariantViolation("landmark.annotated_pixels.non_empty".into()));
        }
        if self.mode == LandmarkMode::FaceCenter && self.annotated_pixels.len() != 1 {
            return Err(Error::InvariantViolation("landmark.face_center.single_pixel".into()));
        }
        Ok(())
    }
}

/// One alignment of the annotated corner sequence onto the map cycle.
///
/// Visible corner `j` maps to map corner `offset + j` (forward) or
/// `offset − j` (backward), modulo the corner count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerMapping {
    pub offset: usize,
    pub forward: bool,
    pub score: f64,
}

impl CornerMapping {
    pub fn corner(&self, j: usize, n: usize) -> usize {
        if self.forward {
            (self.offset + j) % n
        } else {
            (self.offset + n * j - j) % n
        }
    }

    pub fn label(&self) -> String {
        format!("offset={},{}", self.offset, if self.forward { "forward" } else { "backward" })
    }
}

/// Ranks every cyclic offset in both directions by `Σ|est − map|`.
///
/// `map_dists_cyclic[i]` is the distance from map corner `i` to corner `i + 1`.
/// Ties keep the smaller offset, then forward before backward.
pub fn match_corner_sequences(estimated_dists: &[f64], map_dists_cyclic: &[f64]) -> Vec<CornerMapping> {
    let n = map_dists_cyclic.len();
    let mut out = Vec::with_capacity(2 * n);
    for offset in 0..n {
        for forward in [true, false] {
            let m = CornerMapping {
                offset,
                forward,
                score: 0.0,
            };
            let score = estimated_dists
                .iter()
                .enumerate()
                .map(|(j, e)| {
                    let (a, b) = (m.corner(j, n), m.corner(j + 1, n));
                    let side = if forward { a } else { b };
                    (e - map_dists_cyclic[side]).abs()
                })
                .sum();
            out.push(CornerMapping { score, ..m });
        }
    }
    // stable sort keeps the (offset, forward-first) generation order on ties
    out.sort_by(|a, b| a.score.total_cmp(&b.score));
    out
}

fn cyclic_distances(geos: &[GeoCoordinate]) -> Vec<f64> {
    let n = geos.len();
    (0..n).map(|i| geo_distance_m(geos[i], geos[(i + 1) % n])).collect()
}

fn ground_points(k: &Intrinsics, pose: &CameraPose, pixels: &[PixelPoint]) -> Result<Vec<WorldPoint>> {
    pixels.iter().map(|&p| pixel_to_ground(k, pose, p)).collect()
}

fn successive_distances(points: &[WorldPoint]) -> Vec<f64> {
    points.windows(2).map(|w| w[0].distance(w[1])).collect()
}

/// Indices of the pair with the widest horizontal pixel separation.
fn widest_pair(pixels: &[PixelPoint]) -> (usize, usize) {
    let mut best = (0, 1, -1.0);
    for i in 0..pixels.len() {
        for j in i + 1..pixels.len() {
            let du = (pixels[i].u - pixels[j].u).abs();
            if du > best.2 {
                best = (i, j, du);
            }
        }
    }
    (best.0, best.1)
}

/// Solves the camera location given a geo for each annotated pixel.
fn solve_assignment(
    camera: WorldPoint,
    pixels: &[PixelPoint],
    ground: &[WorldPoint],
    geos: &[GeoCoordinate],
    label: String,
) -> Result<CandidateLocation> {
    let (i, j) = widest_pair(pixels);
    let r1 = PixelGeoRef {
        pixel: pixels[i],
        geo: geos[i],
    };
    let r2 = PixelGeoRef {
        pixel: pixels[j],
        geo: geos[j],
    };
    let mut c = absolute_from_two_refs(r1, r2, camera - ground[i], camera - ground[j])?;
    c.branch = format!("{label};{}", c.branch);
    Ok(c)
}

fn one_ref_candidates(
    camera: WorldPoint,
    ground: WorldPoint,
    geo: GeoCoordinate,
    bearing: f64,
    prefix: &str,
    out: &mut Vec<CandidateLocation>,
) -> Result<()> {
    for mut c in absolute_from_one_ref(camera - ground, geo, bearing)? {
        c.branch = format!("{prefix};{}", c.branch);
        out.push(c);
    }
    Ok(())
}

/// Candidate locations from a road intersection.
///
/// One visible corner gives every corner assignment times the four bearing
/// branches. Two or more give one candidate for each of the top forward
/// cyclic mappings that admits a two-circle solution.
pub fn enumerate_intersection_candidates(
    ctx: &IntersectionContext,
    k: &Intrinsics,
    pose: &CameraPose,
) -> Result<Vec<CandidateLocation>> {
    Ok(intersection_candidates_ranked(ctx, k, pose)?.candidates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionCandidates {
    pub candidates: Vec<CandidateLocation>,
    /// Full mapping ranking for audit; empty with one visible corner.
    pub ranking: Vec<CornerMapping>,
}

pub fn intersection_candidates_ranked(
    ctx: &IntersectionContext,
    k: &Intrinsics,
    pose: &CameraPose,
) -> Result<IntersectionCandidates> {
    ctx.check()?;
    let camera = camera_position_world(pose);
    let ground = ground_points(k, pose, &ctx.corner_pixels)?;
    let n = ctx.corner_geos.len();
    if ground.len() == 1 {
        let bearing = ctx
            .street_bearing_deg
            .ok_or(Error::MissingContext("intersection.street_bearing_deg"))?;
        let mut out = Vec::with_capacity(4 * n);
        for (i, &geo) in ctx.corner_geos.iter().enumerate() {
            one_ref_candidates(camera, ground[0], geo, bearing, &format!("corner={i}"), &mut out)?;
        }
        return Ok(IntersectionCandidates {
            candidates: out,
            ranking: Vec::new(),
        });
    }
    let ranking = match_corner_sequences(&successive_distances(&ground), &cyclic_distances(&ctx.corner_geos));
    let mut out = Vec::new();
    for m in ranking.iter().filter(|m| m.forward) {
        if out.len() == TOP_MAPPINGS {
            break;
        }
        let geos: Vec<GeoCoordinate> = (0..ground.len()).map(|j| ctx.corner_geos[m.corner(j, n)]).collect();
        if let Ok(c) = solve_assignment(camera, &ctx.corner_pixels, &ground, &geos, m.label()) {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(Error::MappingInfeasible);
    }
    Ok(IntersectionCandidates {
        candidates: out,
        ranking,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextWarning {
    /// The geo tag lies outside the footprint, so face compensation is suspect.
    GeotagOutsideFootprint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkCandidates {
    pub candidates: Vec<CandidateLocation>,
    pub warnings: Vec<ContextWarning>,
}

/// Even-odd point-in-polygon test in the local metric frame of `p`.
pub fn point_in_footprint(p: GeoCoordinate, footprint: &[GeoCoordinate]) -> bool {
    let pts: Vec<(f64, f64)> = footprint.iter().map(|&v| local_offset(p, v)).collect();
    let mut inside = false;
    let n = pts.len();
    for i in 0..n {
        let (xi, yi) = pts[i];
        let (xj, yj) = pts[(i + n - 1) % n];
        if (yi > 0.0) != (yj > 0.0) && 0.0 < xi + (0.0 - yi) * (xj - xi) / (yj - yi) {
            inside = !inside;
        }
    }
    inside
}

/// Mean distance from the geo tag to the four faces of the footprint's
/// axis-aligned (east/north) bounding box.
pub fn face_compensation_m(geo_tag: GeoCoordinate, footprint: &[GeoCoordinate]) -> f64 {
    let pts: Vec<(f64, f64)> = footprint.iter().map(|&v| local_offset(geo_tag, v)).collect();
    let min_e = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_e = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let min_n = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_n = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    (min_e.abs() + max_e.abs() + min_n.abs() + max_n.abs()) / 4.0
}

/// `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// A vertex combination with both annotation orders, ranked by its better order.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexAssignment {
    /// Ascending footprint vertex indices.
    pub vertices: Vec<usize>,
    pub forward_score: f64,
    pub reverse_score: f64,
}

impl VertexAssignment {
    pub fn score(&self) -> f64 {
        self.forward_score.min(self.reverse_score)
    }
}

fn order_score(est: &[f64], footprint: &[GeoCoordinate], order: &[usize]) -> f64 {
    est.iter()
        .zip(order.windows(2))
        .map(|(e, w)| (e - geo_distance_m(footprint[w[0]], footprint[w[1]])).abs())
        .sum()
}

/// Every vertex combination of the annotated size, best first; ties keep
/// lexicographic order.
pub fn rank_vertex_assignments(est: &[f64], footprint: &[GeoCoordinate]) -> Vec<VertexAssignment> {
    let mut out: Vec<VertexAssignment> = combinations(footprint.len(), est.len() + 1)
        .into_iter()
        .map(|vertices| {
            let mut rev = vertices.clone();
            rev.reverse();
            VertexAssignment {
                forward_score: order_score(est, footprint, &vertices),
                reverse_score: order_score(est, footprint, &rev),
                vertices,
            }
        })
        .collect();
    out.sort_by(|a, b| a.score().total_cmp(&b.score()));
    out
}

/// Candidate locations from a landmark building.
pub fn landmark_candidates(ctx: &LandmarkContext, k: &Intrinsics, pose: &CameraPose) -> Result<LandmarkCandidates> {
    ctx.check()?;
    let mut warnings = Vec::new();
    if !point_in_footprint(ctx.geo_tag, &ctx.footprint) {
        warnings.push(ContextWarning::GeotagOutsideFootprint);
    }
    let camera = camera_position_world(pose);
    let ground = ground_points(k, pose, &ctx.annotated_pixels)?;
    let bearing = || {
        ctx.street_bearing_deg
            .ok_or(Error::MissingContext("landmark.street_bearing_deg"))
    };
    let mut out = Vec::new();
    match ctx.mode {
        LandmarkMode::FaceCenter => {
            let rel = camera - ground[0];
            let d_rel = crate::math::hypot(rel.x, rel.y);
            let d_tau = face_compensation_m(ctx.geo_tag, &ctx.footprint);
            let f = if d_rel > 0.0 { 1.0 + d_tau / d_rel } else { 1.0 };
            let inflated = WorldPoint::new(rel.x * f, rel.y * f, rel.z);
            for mut c in absolute_from_one_ref(inflated, ctx.geo_tag, bearing()?)? {
                c.branch = format!("face-center;{}", c.branch);
                out.push(c);
            }
        }
        LandmarkMode::Corner => {
            if ctx.footprint.len() > MAX_FOOTPRINT_VERTICES {
                return Err(Error::FootprintTooComplex {
                    vertices: ctx.footprint.len(),
                });
            }
            if ground.len() == 1 {
                let b = bearing()?;
                for (i, &geo) in ctx.footprint.iter().enumerate() {
                    one_ref_candidates(camera, ground[0], geo, b, &format!("vertex={i}"), &mut out)?;
                }
            } else {
                let est = successive_distances(&ground);
                let mut kept = 0;
                for a in rank_vertex_assignments(&est, &ctx.footprint) {
                    if kept == TOP_MAPPINGS {
                        break;
                    }
                    let mut rev = a.vertices.clone();
                    rev.reverse();
                    let solved: Result<Vec<CandidateLocation>> = [(&a.vertices, "forward"), (&rev, "reverse")]
                        .into_iter()
                        .map(|(order, dir)| {
                            let geos: Vec<GeoCoordinate> = order.iter().map(|&v| ctx.footprint[v]).collect();
                            let label = format!("vertices={:?},{dir}", order);
                            solve_assignment(camera, &ctx.annotated_pixels, &ground, &geos, label)
                        })
                        .collect();
                    if let Ok(cs) = solved {
                        out.extend(cs);
                        kept += 1;
                    }
                }
                if out.is_empty() {
                    return Err(Error::MappingInfeasible);
                }
            }
        }
    }
    Ok(LandmarkCandidates {
        candidates: out,
        warnings,
    })
}
