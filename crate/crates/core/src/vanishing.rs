//! Vanishing points from annotated parallel segments, image center as the
//! orthocenter of an orthogonal triple, intrinsics from the triple, and the
//! RANSAC path over edgelets.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Axis, Intrinsics, PixelPoint};
use crate::math::{hypot, sqrt};
use crate::{tol, Error, Result};

/// Minimum annotated segment length in pixels.
pub const MIN_SEGMENT_PX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment2D {
    pub a: PixelPoint,
    pub b: PixelPoint,
}

impl LineSegment2D {
    pub fn new(a: PixelPoint, b: PixelPoint) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a.distance(b) < MIN_SEGMENT_PX {
            return Err(Error::DegenerateSegment);
        }
        Ok(Self { a, b })
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Undirected orientation in degrees, `[0, 180)`.
    pub fn orientation_deg(&self) -> f64 {
        let a = crate::math::atan2_deg(self.b.v - self.a.v, self.b.u - self.a.u);
        let a = libm::fmod(a + 360.0, 180.0);
        if a >= 180.0 {
            a - 180.0
        } else {
            a
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            a: self.b,
            b: self.a,
        }
    }
}

/// A vanishing point as a unit homogeneous vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanishingPoint {
    h: Vector3<f64>,
}

impl VanishingPoint {
    /// Normalizes `h` to unit length with a canonical sign: `h₃ > 0` for
    /// finite points, otherwise the first non-zero of `h₁, h₂` positive.
    pub fn from_homogeneous(h: Vector3<f64>) -> Result<Self> {
        let n = h.norm();
        if !(n > tol::SINGULAR) || !n.is_finite() {
            return Err(Error::Degenerate);
        }
        let mut h = h / n;
        let flip = if h.z.abs() >= tol::VP_FINITE {
            h.z < 0.0
        } else if h.x.abs() > tol::SINGULAR {
            h.x < 0.0
        } else {
            h.y < 0.0
        };
        if flip {
            h = -h;
        }
        Ok(Self { h })
    }

    pub fn from_pixel(p: PixelPoint) -> Self {
        Self::from_homogeneous(p.homogeneous()).expect("pixel homogeneous vector has unit third entry")
    }

    pub fn homogeneous(&self) -> Vector3<f64> {
        self.h
    }

    pub fn is_finite(&self) -> bool {
        self.h.z.abs() >= tol::VP_FINITE
    }

    /// Inhomogeneous pixel, present iff the point is finite.
    pub fn pixel(&self) -> Option<PixelPoint> {
        self.is_finite()
            .then(|| PixelPoint::new(self.h.x / self.h.z, self.h.y / self.h.z))
    }

    /// Image direction of an infinite point (or of the ray toward a finite one
    /// seen from the image origin).
    pub fn direction(&self) -> [f64; 2] {
        let n = hypot(self.h.x, self.h.y);
        [self.h.x / n, self.h.y / n]
    }

    /// Image direction from `p` toward this point, up to sign. Zero vector if
    /// `p` coincides with the vanishing point.
    pub(crate) fn direction_from(&self, p: PixelPoint) -> [f64; 2] {
        [self.h.x - p.u * self.h.z, self.h.y - p.v * self.h.z]
    }
}

/// Three vanishing points aligned with the car length, width and height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanishingTriple {
    pub vx: VanishingPoint,
    pub vy: VanishingPoint,
    pub vz: VanishingPoint,
}

impl VanishingTriple {
    pub fn new(vx: VanishingPoint, vy: VanishingPoint, vz: VanishingPoint) -> Result<Self> {
        let t = Self { vx, vy, vz };
        let p = t.pixels()?;
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            if p[i].distance(p[j]) <= 1.0 {
                return Err(Error::CoincidentVanishingPoints);
            }
        }
        Ok(t)
    }

    pub fn get(&self, axis: Axis) -> &VanishingPoint {
        match axis {
            Axis::X => &self.vx,
            Axis::Y => &self.vy,
            Axis::Z => &self.vz,
        }
    }

    /// The three finite pixels; infinite points are rejected because the
    /// two-finite-one-infinite calibration case is not supported.
    pub fn pixels(&self) -> Result<[PixelPoint; 3]> {
        let mut out = [PixelPoint::default(); 3];
        for axis in Axis::ALL {
            out[axis.index()] = self
                .get(axis)
                .pixel()
                .ok_or(Error::InfiniteVanishingPoint(axis))?;
        }
        Ok(out)
    }
}

/// Least-squares vanishing point of lines given by point pairs.
///
/// Points are similarity-normalized (centroid at the origin, mean radius √2)
/// and every line is scaled to a unit normal, so the minimized quantity is the
/// sum of squared point-to-line distances in normalized coordinates.
fn fit_vanishing_point(pairs: &[(PixelPoint, PixelPoint)]) -> Result<VanishingPoint> {
    if pairs.len() < 2 {
        return Err(Error::Degenerate);
    }
    let n = (2 * pairs.len()) as f64;
    let (mut mu, mut mv) = (0.0, 0.0);
    for (a, b) in pairs {
        mu += a.u + b.u;
        mv += a.v + b.v;
    }
    mu /= n;
    mv /= n;
    let mean_r = pairs
        .iter()
        .map(|(a, b)| hypot(a.u - mu, a.v - mv) + hypot(b.u - mu, b.v - mv))
        .sum::<f64>()
        / n;
    let s = if mean_r > 0.0 { core::f64::consts::SQRT_2 / mean_r } else { 1.0 };
    let norm = |p: &PixelPoint| Vector3::new((p.u - mu) * s, (p.v - mv) * s, 1.0);

    let mut scatter = Matrix3::<f64>::zeros();
    for (a, b) in pairs {
        let l = norm(a).cross(&norm(b));
        let ln = hypot(l.x, l.y);
        if ln < tol::SINGULAR {
            return Err(Error::Degenerate);
        }
        let l = l / ln;
        scatter += l * l.transpose();
    }

    let svd = scatter.svd(true, false);
    let u = svd.u.ok_or(Error::Degenerate)?;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let (s_max, s_mid) = (svd.singular_values[order[0]], svd.singular_values[order[1]]);
    if s_mid <= 1e-12 * s_max {
        return Err(Error::Degenerate);
    }
    let v = u.column(order[2]);
    // undo the normalization: v = T⁻¹·v'
    let h = Vector3::new(v.x / s + mu * v.z, v.y / s + mv * v.z, v.z);
    VanishingPoint::from_homogeneous(h)
}

/// Homogeneous least-squares vanishing point of ≥ 2 segments.
pub fn estimate_vp(segments: &[LineSegment2D]) -> Result<VanishingPoint> {
    let pairs: Vec<_> = segments.iter().map(|s| (s.a, s.b)).collect();
    fit_vanishing_point(&pairs)
}

fn triangle_area(p: &[PixelPoint; 3]) -> f64 {
    ((p[1].u - p[0].u) * (p[2].v - p[0].v) - (p[2].u - p[0].u) * (p[1].v - p[0].v)).abs() / 2.0
}

/// Image center as the orthocenter of the vanishing-point triangle.
pub fn orthocenter_image_center(t: &VanishingTriple) -> Result<PixelPoint> {
    let p = t.pixels()?;
    let area = triangle_area(&p);
    if !(area > 1.0) {
        return Err(Error::DegenerateTriangle { area });
    }
    // Solve in centroid-relative coordinates for conditioning.
    let gu = (p[0].u + p[1].u + p[2].u) / 3.0;
    let gv = (p[0].v + p[1].v + p[2].v) / 3.0;
    let (u1, v1) = (p[0].u - gu, p[0].v - gv);
    let (u2, v2) = (p[1].u - gu, p[1].v - gv);
    let (u3, v3) = (p[2].u - gu, p[2].v - gv);
    // (H − v₃)·(v₁ − v₂) = 0 and (H − v₂)·(v₁ − v₃) = 0
    let (a11, a12) = (u1 - u2, v1 - v2);
    let (a21, a22) = (u1 - u3, v1 - v3);
    let b1 = u3 * a11 + v3 * a12;
    let b2 = u2 * a21 + v2 * a22;
    let det = a11 * a22 - a12 * a21;
    if det.abs() < tol::SINGULAR {
        return Err(Error::DegenerateTriangle { area });
    }
    let hu = (b1 * a22 - a12 * b2) / det;
    let hv = (a11 * b2 - b1 * a21) / det;
    Ok(PixelPoint::new(hu + gu, hv + gv))
}

/// Intrinsics recovered from an orthogonal triple with the orthogonality
/// residual as a quality score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntrinsicsFit {
    pub intrinsics: Intrinsics,
    /// RMS of `vᵢᵀ·ω·vⱼ` over the three pairs, `ω = K⁻ᵀK⁻¹` scaled so that
    /// `ω₃₃`-side terms equal one.
    pub residual: f64,
}

/// Solves `(1/fx², 1/fy²)` by least squares over the three orthogonality
/// constraints with the image center fixed at the orthocenter.
pub fn solve_intrinsics(t: &VanishingTriple) -> Result<IntrinsicsFit> {
    let c = orthocenter_image_center(t)?;
    let p = t.pixels()?;
    let d: [(f64, f64); 3] = [
        (p[0].u - c.u, p[0].v - c.v),
        (p[1].u - c.u, p[1].v - c.v),
        (p[2].u - c.u, p[2].v - c.v),
    ];
    // rows: a·du_i·du_j + b·dv_i·dv_j = −1
    let rows = [(0, 1), (1, 2), (0, 2)].map(|(i, j)| (d[i].0 * d[j].0, d[i].1 * d[j].1));
    // Column scaling keeps the 2×2 normal equations well conditioned.
    let su = rows.iter().map(|r| r.0 * r.0).sum::<f64>().sqrt_or_one();
    let sv = rows.iter().map(|r| r.1 * r.1).sum::<f64>().sqrt_or_one();
    let (mut n11, mut n12, mut n22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in rows {
        let (x, y) = (x / su, y / sv);
        n11 += x * x;
        n12 += x * y;
        n22 += y * y;
        r1 -= x;
        r2 -= y;
    }
    let det = n11 * n22 - n12 * n12;
    if det.abs() < tol::SINGULAR * (n11 * n22).max(tol::SINGULAR) {
        return Err(Error::DegenerateTriangle {
            area: triangle_area(&p),
        });
    }
    let a = (r1 * n22 - n12 * r2) / det / su;
    let b = (n11 * r2 - n12 * r1) / det / sv;
    let residual = sqrt(
        rows.iter()
            .map(|&(x, y)| {
                let e = a * x + b * y + 1.0;
                e * e
            })
            .sum::<f64>()
            / 3.0,
    );
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::NonPositiveFocal { residual });
    }
    let intrinsics = Intrinsics::new(1.0 / sqrt(a), 1.0 / sqrt(b), c.u, c.v)?;
    Ok(IntrinsicsFit {
        intrinsics,
        residual,
    })
}

trait SqrtOrOne {
    fn sqrt_or_one(self) -> f64;
}

impl SqrtOrOne for f64 {
    fn sqrt_or_one(self) -> f64 {
        if self > 0.0 {
            sqrt(self)
        } else {
            1.0
        }
    }
}

/// Short oriented edge fragment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edgelet {
    pub center: PixelPoint,
    direction: [f64; 2],
    pub strength: f64,
}

impl Edgelet {
    pub fn new(center: PixelPoint, direction: [f64; 2], strength: f64) -> Result<Self> {
        let n = hypot(direction[0], direction[1]);
        if !(n > tol::SINGULAR) || !center.is_finite() {
            return Err(Error::InvalidArgument("edgelet direction must be non-zero"));
        }
        if !(strength >= 0.0) {
            return Err(Error::InvalidArgument("edgelet strength must be non-negative"));
        }
        Ok(Self {
            center,
            direction: [direction[0] / n, direction[1] / n],
            strength,
        })
    }

    pub fn direction(&self) -> [f64; 2] {
        self.direction
    }

    fn line(&self) -> Vector3<f64> {
        let a = self.center.homogeneous();
        let b = Vector3::new(self.center.u + self.direction[0], self.center.v + self.direction[1], 1.0);
        a.cross(&b)
    }

    fn segment_points(&self) -> (PixelPoint, PixelPoint) {
        let h = 5.0;
        (
            PixelPoint::new(self.center.u - h * self.direction[0], self.center.v - h * self.direction[1]),
            PixelPoint::new(self.center.u + h * self.direction[0], self.center.v + h * self.direction[1]),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Edgelet-to-hypothesis angular inlier threshold.
    pub inlier_angle_deg: f64,
    /// Maximum angle between the axis hint and the direction toward a hypothesis.
    pub hint_cone_deg: f64,
    pub min_inliers: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            inlier_angle_deg: 2.0,
            hint_cone_deg: 15.0,
            min_inliers: 4,
        }
    }
}

/// Sine of the undirected angle between `a` and `b`; `None` if either is zero.
fn undirected_sin(a: [f64; 2], b: [f64; 2]) -> Option<f64> {
    let na = hypot(a[0], a[1]);
    let nb = hypot(b[0], b[1]);
    if na < tol::SINGULAR || nb < tol::SINGULAR {
        return None;
    }
    Some((a[0] * b[1] - a[1] * b[0]).abs() / (na * nb))
}

fn is_inlier(e: &Edgelet, vp: &VanishingPoint, max_sin: f64) -> bool {
    undirected_sin(e.direction, vp.direction_from(e.center)).is_some_and(|s| s <= max_sin)
}

fn hint_sin(vp: &VanishingPoint, hint: &LineSegment2D) -> f64 {
    let along = [hint.b.u - hint.a.u, hint.b.v - hint.a.v];
    undirected_sin(along, vp.direction_from(hint.a)).unwrap_or(f64::INFINITY)
}

/// Within the cone of `hints[axis]` and no closer to another axis hint.
/// Hints are undirected, so near the horizon a neighboring axis's point can
/// fall inside the cone too.
fn consistent_with_hint(vp: &VanishingPoint, hints: &[LineSegment2D; 3], axis: Axis, max_sin: f64) -> bool {
    let own = hint_sin(vp, &hints[axis.index()]);
    own <= max_sin
        && Axis::ALL
            .iter()
            .filter(|&&a| a != axis)
            .all(|&a| own <= hint_sin(vp, &hints[a.index()]))
}

const REFINE_ROUNDS: usize = 10;

/// Sine of the angle between an edgelet and the ray toward `vp`.
fn residual_sin(e: &Edgelet, vp: &VanishingPoint) -> f64 {
    undirected_sin(e.direction, vp.direction_from(e.center)).unwrap_or(f64::INFINITY)
}

/// Joint refinement: every edgelet is assigned to the vanishing point that
/// explains it best, if within the inlier threshold, and each axis is refit
/// over its own edgelets until the estimates stop moving. Without the
/// exclusive assignment a hypothesis that also absorbs a few edgelets of
/// another axis can outvote the true point.
fn refine(edgelets: &[Edgelet], mut vps: [VanishingPoint; 3], inlier_sin: f64) -> [VanishingPoint; 3] {
    for _ in 0..REFINE_ROUNDS {
        let mut groups: [Vec<(PixelPoint, PixelPoint)>; 3] = Default::default();
        for e in edgelets {
            let r = vps.map(|vp| residual_sin(e, &vp));
            let best = (0..3).min_by(|&i, &j| r[i].total_cmp(&r[j])).unwrap_or(0);
            if r[best] <= inlier_sin {
                groups[best].push(e.segment_points());
            }
        }
        let mut changed = false;
        for (i, pairs) in groups.iter().enumerate() {
            if let Ok(next) = fit_vanishing_point(pairs) {
                changed |= next != vps[i];
                vps[i] = next;
            }
        }
        if !changed {
            break;
        }
    }
    vps
}

/// Per-axis RANSAC over edgelets guided by the annotated car axes.
///
/// `axis_hints` are ordered x, y, z and usually run from the annotated origin
/// to the axis endpoint. The generator is seeded so results are reproducible.
pub fn ransac_vps(
    edgelets: &[Edgelet],
    axis_hints: &[LineSegment2D; 3],
    config: &RansacConfig,
    seed: u64,
) -> Result<VanishingTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inlier_sin = libm::sin(config.inlier_angle_deg.to_radians());
    let hint_sin = libm::sin(config.hint_cone_deg.to_radians());
    let lines: Vec<Vector3<f64>> = edgelets.iter().map(Edgelet::line).collect();

    let mut found: [Option<VanishingPoint>; 3] = [None; 3];
    let mut failed = Vec::new();
    for axis in Axis::ALL {
        let mut best: Option<(usize, f64, VanishingPoint)> = None;
        if edgelets.len() >= 2 {
            for _ in 0..config.iterations {
                let i = rng.gen_range(0..edgelets.len());
                let mut j = rng.gen_range(0..edgelets.len() - 1);
                if j >= i {
                    j += 1;
                }
                let Ok(vp) = VanishingPoint::from_homogeneous(lines[i].cross(&lines[j])) else {
                    continue;
                };
                if !consistent_with_hint(&vp, axis_hints, axis, hint_sin) {
                    continue;
                }
                let (count, strength) = edgelets
                    .iter()
                    .filter(|e| is_inlier(e, &vp, inlier_sin))
                    .fold((0usize, 0.0), |(c, s), e| (c + 1, s + e.strength));
                let better = match &best {
                    None => true,
                    Some((bc, bs, _)) => count > *bc || (count == *bc && strength > *bs),
                };
                if better {
                    best = Some((count, strength, vp));
                }
            }
        }
        match best {
            Some((count, _, vp)) if count >= config.min_inliers => {
                found[axis.index()] = Some(vp);
            }
            _ => failed.push(axis),
        }
    }
    if !failed.is_empty() {
        return Err(Error::InsufficientInliers(failed));
    }
    let [Some(vx), Some(vy), Some(vz)] = found else {
        unreachable!("all axes found");
    };
    let [vx, vy, vz] = refine(edgelets, [vx, vy, vz], inlier_sin);
    VanishingTriple::new(vx, vy, vz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(a: (f64, f64), b: (f64, f64)) -> LineSegment2D {
        LineSegment2D::new(PixelPoint::new(a.0, a.1), PixelPoint::new(b.0, b.1)).unwrap()
    }

    fn vp(u: f64, v: f64) -> VanishingPoint {
        VanishingPoint::from_pixel(PixelPoint::new(u, v))
    }

    #[test]
    fn rejects_short_segments() {
        let p = PixelPoint::new(1.0, 1.0);
        assert_eq!(LineSegment2D::new(p, PixelPoint::new(2.0, 2.0)), Err(Error::DegenerateSegment));
    }

    #[test]
    fn two_crossing_lines() {
        // v = u and v = −u + 2 meet at (1, 1)
        let v = estimate_vp(&[seg((3.0, 3.0), (10.0, 10.0)), seg((5.0, -3.0), (-4.0, 6.0))]).unwrap();
        let p = v.pixel().unwrap();
        assert!((p.u - 1.0).abs() < 1e-9 && (p.v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn parallel_segments_are_infinite() {
        let v = estimate_vp(&[seg((0.0, 0.0), (10.0, 0.0)), seg((0.0, 10.0), (10.0, 10.0))]).unwrap();
        assert!(!v.is_finite());
        assert!(v.pixel().is_none());
        let d = v.direction();
        assert!((d[0] - 1.0).abs() < 1e-12 && d[1].abs() < 1e-12);
    }

    #[test]
    fn collinear_segments_are_degenerate() {
        let r = estimate_vp(&[seg((0.0, 0.0), (10.0, 10.0)), seg((20.0, 20.0), (30.0, 30.0))]);
        assert_eq!(r, Err(Error::Degenerate));
        assert_eq!(estimate_vp(&[seg((0.0, 0.0), (10.0, 10.0))]), Err(Error::Degenerate));
    }

    #[test]
    fn right_triangle_orthocenter() {
        let t = VanishingTriple::new(vp(0.0, 0.0), vp(4.0, 0.0), vp(0.0, 3.0)).unwrap();
        assert_eq!(orthocenter_image_center(&t).unwrap(), PixelPoint::new(0.0, 0.0));
    }

    #[test]
    fn orthocenter_is_permutation_invariant() {
        let pts = [vp(-1500.0, 400.0), vp(2400.0, 300.0), vp(700.0, 5200.0)];
        let base = orthocenter_image_center(&VanishingTriple::new(pts[0], pts[1], pts[2]).unwrap()).unwrap();
        for (i, j, k) in [(0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)] {
            let h = orthocenter_image_center(&VanishingTriple::new(pts[i], pts[j], pts[k]).unwrap()).unwrap();
            assert!(h.distance(base) < 1e-9, "{h:?} vs {base:?}");
        }
    }

    #[test]
    fn collinear_triple_is_degenerate() {
        let t = VanishingTriple::new(vp(0.0, 0.0), vp(10.0, 10.0), vp(30.0, 30.0)).unwrap();
        assert!(matches!(orthocenter_image_center(&t), Err(Error::DegenerateTriangle { .. })));
    }

    #[test]
    fn triple_requires_finite_distinct_points() {
        let inf = VanishingPoint::from_homogeneous(Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(
            VanishingTriple::new(vp(0.0, 0.0), inf, vp(0.0, 3.0)),
            Err(Error::InfiniteVanishingPoint(Axis::Y))
        );
        assert_eq!(
            VanishingTriple::new(vp(0.0, 0.0), vp(0.5, 0.0), vp(0.0, 3.0)),
            Err(Error::CoincidentVanishingPoints)
        );
    }

    #[test]
    fn obtuse_triangle_has_no_positive_focal() {
        let t = VanishingTriple::new(vp(0.0, 0.0), vp(100.0, 0.0), vp(50.0, 5.0)).unwrap();
        assert!(matches!(solve_intrinsics(&t), Err(Error::NonPositiveFocal { .. })));
    }

    #[test]
    fn edgelet_validation() {
        assert!(Edgelet::new(PixelPoint::new(0.0, 0.0), [0.0, 0.0], 1.0).is_err());
        let e = Edgelet::new(PixelPoint::new(0.0, 0.0), [3.0, 4.0], 1.0).unwrap();
        assert!((e.direction()[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn single_axis_edgelets_leave_other_axes_unsupported() {
        let target = PixelPoint::new(3000.0, 400.0);
        let edgelets: Vec<_> = (0..5)
            .map(|i| {
                let c = PixelPoint::new(100.0 + 60.0 * i as f64, 200.0 + 50.0 * i as f64);
                Edgelet::new(c, [target.u - c.u, target.v - c.v], 1.0).unwrap()
            })
            .collect();
        let hints = [
            seg((300.0, 500.0), (500.0, 490.0)),
            seg((300.0, 500.0), (150.0, 560.0)),
            seg((300.0, 500.0), (305.0, 380.0)),
        ];
        let err = ransac_vps(&edgelets, &hints, &RansacConfig::default(), 1).unwrap_err();
        assert_eq!(err, Error::InsufficientInliers(alloc::vec![Axis::Y, Axis::Z]));
    }
}
