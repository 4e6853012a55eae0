//! Rotation from the vanishing triple, translation from one known car
//! dimension, and aggregation of per-annotator candidates.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{Matrix3, Vector3};

use crate::annotation::AnnotationBundle;
use crate::geometry::{
    camera_position_world, nearest_rotation, Axis, CameraPose, Intrinsics, PixelPoint, Rotation, Translation,
    WorldPoint,
};
use crate::vanishing::{estimate_vp, solve_intrinsics, VanishingTriple};
use crate::{tol, Error, Result};

/// Largest tolerated Frobenius gap between the raw column matrix and its
/// sanitized rotation.
pub const MAX_SANITIZE_DISTANCE: f64 = 0.5;

/// Default radius for single-linkage clustering of candidate positions.
pub const DEFAULT_CLUSTER_RADIUS_M: f64 = 5.0;

/// Pixels of the nearest bottom car corner and one point along each car axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarAxesAnnotation {
    pub origin: PixelPoint,
    pub x_end: PixelPoint,
    pub y_end: PixelPoint,
    pub z_end: PixelPoint,
}

impl CarAxesAnnotation {
    pub fn new(origin: PixelPoint, x_end: PixelPoint, y_end: PixelPoint, z_end: PixelPoint) -> Result<Self> {
        let a = Self {
            origin,
            x_end,
            y_end,
            z_end,
        };
        let p = a.points();
        if !p.iter().all(|q| q.is_finite()) {
            return Err(Error::InvariantViolation("car_axes.finite".into()));
        }
        for i in 0..4 {
            for j in i + 1..4 {
                if p[i].distance(p[j]) <= 1.0 {
                    return Err(Error::InvariantViolation("car_axes.distinct".into()));
                }
            }
        }
        Ok(a)
    }

    pub fn points(&self) -> [PixelPoint; 4] {
        [self.origin, self.x_end, self.y_end, self.z_end]
    }

    pub fn endpoint(&self, axis: Axis) -> PixelPoint {
        match axis {
            Axis::X => self.x_end,
            Axis::Y => self.y_end,
            Axis::Z => self.z_end,
        }
    }
}

/// Physical car box size in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarDimensions {
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl CarDimensions {
    pub fn new(length_m: f64, width_m: f64, height_m: f64) -> Result<Self> {
        let ok = |x: f64| x > 0.5 && x < 30.0;
        if !(ok(length_m) && ok(width_m) && ok(height_m)) {
            return Err(Error::InvalidDimensions("each dimension must lie in (0.5, 30) m"));
        }
        Ok(Self {
            length_m,
            width_m,
            height_m,
        })
    }

    pub fn along(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.length_m,
            Axis::Y => self.width_m,
            Axis::Z => self.height_m,
        }
    }
}

impl Default for CarDimensions {
    /// A typical sedan.
    fn default() -> Self {
        Self {
            length_m: 4.5,
            width_m: 1.8,
            height_m: 1.5,
        }
    }
}

/// Whether the annotated axes formed a left-handed triad.
///
/// When they do, the width column is negated so the recovered world frame
/// stays right-handed with `z` up; the annotated width endpoint then sits at
/// `y = −W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handedness {
    Right,
    MirroredWidth,
}

impl Handedness {
    /// Sign of the annotated endpoint coordinate along `axis`.
    pub fn endpoint_sign(self, axis: Axis) -> f64 {
        match (self, axis) {
            (Handedness::MirroredWidth, Axis::Y) => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRotation {
    pub rotation: Rotation,
    pub handedness: Handedness,
    /// Frobenius distance between the raw column estimate and `rotation`.
    pub sanitize_distance: f64,
}

/// Rotation whose columns are the normalized back-projected vanishing points.
///
/// Each column's sign is chosen so that moving from the origin along the axis
/// moves the image point toward the annotated endpoint.
pub fn rotation_from_vps(k: &Intrinsics, t: &VanishingTriple, axes: &CarAxesAnnotation) -> Result<OrientedRotation> {
    let kinv = k.inverse_matrix();
    let o = k.unproject(axes.origin);
    let mut cols = [Vector3::zeros(); 3];
    for axis in Axis::ALL {
        let mut r = kinv * t.get(axis).homogeneous();
        let n = r.norm();
        if !(n > tol::SINGULAR) {
            return Err(Error::Degenerate);
        }
        r /= n;
        // image-plane motion of origin + s·r at s = 0 (normalized coords)
        let dx = (r.x - o.x * r.z) * k.fx;
        let dy = (r.y - o.y * r.z) * k.fy;
        let end = axes.endpoint(axis);
        let (ex, ey) = (end.u - axes.origin.u, end.v - axes.origin.v);
        if dx * ex + dy * ey < 0.0 {
            r = -r;
        }
        cols[axis.index()] = r;
    }
    let mut raw = Matrix3::from_columns(&cols);
    let mut handedness = Handedness::Right;
    if raw.determinant() < 0.0 {
        raw.column_mut(Axis::Y.index()).neg_mut();
        handedness = Handedness::MirroredWidth;
    }
    let rotation = nearest_rotation(&raw)?;
    let sanitize_distance = (rotation.matrix() - raw).norm();
    if sanitize_distance > MAX_SANITIZE_DISTANCE {
        return Err(Error::NotARotation {
            distance: sanitize_distance,
        });
    }
    Ok(OrientedRotation {
        rotation,
        handedness,
        sanitize_distance,
    })
}

/// Translation from the origin pixel and the pixel of the world point
/// `endpoint_m · e_axis`.
///
/// `endpoint_m` is the signed coordinate of the annotated endpoint along
/// `axis` (the car dimension, negated for a mirrored width axis).
pub fn translation_from_dimension(
    k: &Intrinsics,
    r: &Rotation,
    origin_px: PixelPoint,
    end_px: PixelPoint,
    axis: Axis,
    endpoint_m: f64,
) -> Result<Translation> {
    if !(endpoint_m.abs() > 0.0) || !endpoint_m.is_finite() {
        return Err(Error::InvalidArgument("dimension must be non-zero"));
    }
    let o = k.unproject(origin_px);
    let e = k.unproject(end_px);
    let (a0, b0, a1) = (o.x, o.y, e.x);
    if (a0 - a1).abs() < tol::GEOMETRIC {
        return Err(Error::ParallelProjection);
    }
    let col = r.column(axis);
    // (D·r₁ₖ + t_x)/(D·r₃ₖ + t_z) = a₁ with t_x = a₀·t_z
    let mut tz = endpoint_m * (a1 * col.z - col.x) / (a0 - a1);
    if tz < 0.0 {
        tz = -tz;
    }
    if !(tz > tol::GEOMETRIC) {
        return Err(Error::NegativeDepth);
    }
    Ok(Translation::new(a0 * tz, b0 * tz, tz))
}

/// One relative pose hypothesis from a single annotator.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativePoseCandidate {
    pub pose: CameraPose,
    pub intrinsics: Intrinsics,
    /// Car axis whose dimension fixed the translation.
    pub source_axis: Axis,
    pub annotator_id: String,
    pub handedness: Handedness,
    /// Intrinsics orthogonality residual.
    pub quality: f64,
}

impl RelativePoseCandidate {
    pub fn camera_position(&self) -> WorldPoint {
        camera_position_world(&self.pose)
    }
}

/// Two candidates per annotator: translation from the car length and from
/// the car width. The height axis is never used for translation.
pub fn relative_pose_candidates(bundle: &AnnotationBundle, dims: &CarDimensions) -> Result<Vec<RelativePoseCandidate>> {
    candidates_untagged(bundle, dims).map_err(|e| e.for_annotator(&bundle.annotator_id))
}

fn candidates_untagged(bundle: &AnnotationBundle, dims: &CarDimensions) -> Result<Vec<RelativePoseCandidate>> {
    let sets = &bundle.parallel_sets;
    let vx = estimate_vp(&sets.x)?;
    let vy = estimate_vp(&sets.y)?;
    let vz = estimate_vp(&sets.z)?;
    let triple = VanishingTriple::new(vx, vy, vz)?;
    let fit = solve_intrinsics(&triple)?;
    let k = fit.intrinsics;
    let axes = &bundle.car_axes;
    let oriented = rotation_from_vps(&k, &triple, axes)?;

    [Axis::X, Axis::Y]
        .into_iter()
        .map(|axis| {
            let d = oriented.handedness.endpoint_sign(axis) * dims.along(axis);
            let t = translation_from_dimension(&k, &oriented.rotation, axes.origin, axes.endpoint(axis), axis, d)?;
            Ok(RelativePoseCandidate {
                pose: CameraPose::new(oriented.rotation, t),
                intrinsics: k,
                source_axis: axis,
                annotator_id: bundle.annotator_id.clone(),
                handedness: oriented.handedness,
                quality: fit.residual,
            })
        })
        .collect()
}

/// Largest single-linkage cluster of candidate positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Input indices, ascending.
    pub members: Vec<usize>,
    pub centroid: WorldPoint,
    /// Mean squared distance of members to the centroid.
    pub variance: f64,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn lexicographic(a: &WorldPoint, b: &WorldPoint) -> Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}

fn summarize(points: &[WorldPoint], members: Vec<usize>) -> Cluster {
    // summing in a canonical order makes the centroid independent of input order
    let mut pts: Vec<WorldPoint> = members.iter().map(|&i| points[i]).collect();
    pts.sort_by(lexicographic);
    let n = pts.len() as f64;
    let (mut sx, mut sy, mut sz) = (0.0, 0.0, 0.0);
    for p in &pts {
        sx += p.x;
        sy += p.y;
        sz += p.z;
    }
    let centroid = WorldPoint::new(sx / n, sy / n, sz / n);
    let variance = pts
        .iter()
        .map(|p| {
            let d = p.distance(centroid);
            d * d
        })
        .sum::<f64>()
        / n;
    Cluster {
        members,
        centroid,
        variance,
    }
}

/// Single-linkage clustering at `radius_m`; returns the largest cluster, ties
/// broken by smaller variance and then by the earliest member index.
pub fn largest_cluster(points: &[WorldPoint], radius_m: f64) -> Result<Cluster> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(radius_m >= 0.0) {
        return Err(Error::InvalidArgument("cluster radius must be non-negative"));
    }
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if points[i].distance(points[j]) <= radius_m {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot: Vec<Option<usize>> = alloc::vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_slot[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_slot[r] = Some(groups.len());
                groups.push(alloc::vec![i]);
            }
        }
    }
    groups
        .into_iter()
        .map(|m| summarize(points, m))
        .min_by(|a, b| {
            b.members
                .len()
                .cmp(&a.members.len())
                .then(a.variance.total_cmp(&b.variance))
                .then(a.members[0].cmp(&b.members[0]))
        })
        .ok_or(Error::EmptyInput)
}

/// Centroid of the largest cluster of candidate camera positions.
pub fn aggregate_candidates(candidates: &[WorldPoint], radius_m: f64) -> Result<WorldPoint> {
    largest_cluster(candidates, radius_m).map(|c| c.centroid)
}
