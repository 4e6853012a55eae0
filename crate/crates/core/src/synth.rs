//! Ground-truth scene generator, annotation renderer and error scoring.
//!
//! A scene places a camera looking at a parked car. The world frame follows
//! the estimator's convention: origin at the car's bottom corner nearest the
//! camera, `x` along the car length into the car, `z` up, `y = z × x`. The
//! car's width therefore spans `y ∈ [0, W]` or `y ∈ [−W, 0]` depending on
//! which side the camera sits; see [`SyntheticScene::width_sign`].
//!
//! Parallel-line annotations are drawn from a pool of world lines per axis:
//! the car's own edges plus curbs, building edges and poles around it. Every
//! rendered pixel is the exact projection of a world point before noise.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::annotation::{AnnotationBundle, ImageSize, ParallelSets};
use crate::context::IntersectionContext;
use crate::extrinsics::{CarAxesAnnotation, CarDimensions};
use crate::geodesy::{local_offset, offset_local, GeoCoordinate, PixelGeoRef};
use crate::geometry::{
    camera_position_world, project_to_pixel, Axis, CameraPose, Intrinsics, PixelPoint, Rotation, WorldPoint,
};
use crate::math::{atan2_deg, hypot, normalize_deg, sincos_deg};
use crate::sensors::pixel_to_ground;
use crate::stats::Percentiles;
use crate::vanishing::{Edgelet, LineSegment2D, VanishingPoint};
use crate::{Error, Result};

/// Rejection sampling gives up after this many attempts.
pub const MAX_ATTEMPTS: usize = 10_000;

/// Closed interval sampled uniformly; a degenerate interval yields its bound exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.gen_range(self.min..=self.max)
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionConfig {
    /// Side lengths of the rectangular intersection.
    pub street_width_m: Range,
    /// Sides must differ by at least this much so the mapping ranking is informative.
    pub min_width_difference_m: f64,
    /// Horizontal distance from the camera to the intersection center.
    pub distance_m: Range,
    pub min_visible: usize,
}

impl Default for IntersectionConfig {
    fn default() -> Self {
        Self {
            street_width_m: Range::new(8.0, 25.0),
            min_width_difference_m: 3.0,
            distance_m: Range::new(12.0, 40.0),
            min_visible: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub image_size: ImageSize,
    pub focal_px: Range,
    /// Uniform offset of the principal point from the image center.
    pub principal_jitter_px: f64,
    pub camera_height_m: Range,
    /// Horizontal distance from the camera to the car's ground center.
    pub car_distance_m: Range,
    /// Horizontal angle between the viewing direction and the car length axis.
    pub relative_azimuth_deg: Range,
    pub min_pitch_deg: f64,
    pub max_roll_deg: f64,
    /// Every finite vanishing point lies within this many focal lengths of
    /// the principal point.
    pub max_vp_distance_f: f64,
    pub car_dims: CarDimensions,
    pub anchor_lat: Range,
    pub anchor_lon: Range,
    pub street_bearing_deg: Range,
    pub env_lines_per_axis: usize,
    /// Parallel segments each annotator draws per axis.
    pub lines_per_annotator: (usize, usize),
    /// Reject pool lines shorter than this in the image.
    pub min_line_px: f64,
    /// Largest orientation gap between a pool line and the car's own edge.
    pub max_line_deviation_deg: f64,
    pub ref_count: usize,
    pub min_ref_separation_px: f64,
    /// Smallest ground-plane angle at the camera between any two references.
    pub min_ref_angle_deg: f64,
    pub max_ref_distance_m: f64,
    pub intersection: Option<IntersectionConfig>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            image_size: ImageSize {
                width: 1280,
                height: 720,
            },
            focal_px: Range::new(800.0, 1400.0),
            principal_jitter_px: 20.0,
            camera_height_m: Range::new(2.0, 15.0),
            car_distance_m: Range::new(5.0, 50.0),
            relative_azimuth_deg: Range::new(25.0, 65.0),
            min_pitch_deg: 10.0,
            max_roll_deg: 3.0,
            max_vp_distance_f: 12.0,
            car_dims: CarDimensions::default(),
            anchor_lat: Range::new(-0.5, 0.5),
            anchor_lon: Range::new(-0.5, 0.5),
            street_bearing_deg: Range::new(-179.0, 180.0),
            env_lines_per_axis: 6,
            lines_per_annotator: (3, 4),
            min_line_px: 30.0,
            max_line_deviation_deg: 25.0,
            ref_count: 2,
            min_ref_separation_px: 100.0,
            min_ref_angle_deg: 20.0,
            max_ref_distance_m: 80.0,
            intersection: None,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            self.focal_px,
            self.camera_height_m,
            self.car_distance_m,
            self.relative_azimuth_deg,
            self.anchor_lat,
            self.anchor_lon,
            self.street_bearing_deg,
        ];
        if !ranges.iter().all(Range::is_valid) {
            return Err(Error::InvalidArgument("config range must satisfy min <= max"));
        }
        if !(self.focal_px.min > 0.0 && self.camera_height_m.min > 0.0 && self.car_distance_m.min > 0.0) {
            return Err(Error::InvalidArgument("focal, height and distance must be positive"));
        }
        if self.anchor_lat.min.abs().max(self.anchor_lat.max.abs()) > 80.0 {
            return Err(Error::InvalidArgument("anchor latitude must lie within ±80°"));
        }
        let (lo, hi) = self.lines_per_annotator;
        if lo < 2 || lo > hi {
            return Err(Error::InvalidArgument("lines_per_annotator must satisfy 2 <= min <= max"));
        }
        if self.image_size.width == 0 || self.image_size.height == 0 {
            return Err(Error::InvalidArgument("image size must be positive"));
        }
        Ok(())
    }
}

/// A world line segment.
pub type WorldSegment = (WorldPoint, WorldPoint);

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticIntersection {
    /// Clockwise seen from above.
    pub corners_world: Vec<WorldPoint>,
    pub corner_geos: Vec<GeoCoordinate>,
    /// Visible corner indices, contiguous and clockwise.
    pub visible: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub seed: u64,
    pub image_size: ImageSize,
    pub intrinsics: Intrinsics,
    pub pose: CameraPose,
    pub camera_geo: GeoCoordinate,
    pub camera_height_m: f64,
    pub car_dims: CarDimensions,
    /// Bearing of world `+x`.
    pub car_yaw_deg: f64,
    pub street_bearing_deg: f64,
    /// `+1` when the car spans `y ∈ [0, W]`, `−1` for `y ∈ [−W, 0]`.
    pub width_sign: f64,
    /// Geo of the world origin.
    pub anchor: GeoCoordinate,
    /// Visible world lines parallel to each axis, car edges first.
    pub line_pool: [Vec<WorldSegment>; 3],
    /// Ground reference points.
    pub refs: Vec<WorldPoint>,
    pub intersection: Option<SyntheticIntersection>,
}

impl SyntheticScene {
    pub fn camera_position(&self) -> WorldPoint {
        camera_position_world(&self.pose)
    }

    /// World meters to (east, north) meters about the origin.
    pub fn world_to_local(&self, p: WorldPoint) -> (f64, f64) {
        let (s, c) = sincos_deg(self.car_yaw_deg);
        (p.x * s - p.y * c, p.x * c + p.y * s)
    }

    pub fn world_to_geo(&self, p: WorldPoint) -> Result<GeoCoordinate> {
        let (e, n) = self.world_to_local(p);
        offset_local(self.anchor, e, n)
    }

    pub fn geo_to_world(&self, g: GeoCoordinate) -> WorldPoint {
        let (e, n) = local_offset(self.anchor, g);
        let (s, c) = sincos_deg(self.car_yaw_deg);
        WorldPoint::new(e * s + n * c, -e * c + n * s, 0.0)
    }

    pub fn project(&self, p: WorldPoint) -> Result<PixelPoint> {
        Ok(project_to_pixel(&self.intrinsics, &self.pose, p)?.pixel)
    }

    /// Car box corners in the world frame.
    pub fn car_corners(&self) -> [WorldPoint; 8] {
        let d = &self.car_dims;
        let w = self.width_sign * d.width_m;
        let mut out = [WorldPoint::ORIGIN; 8];
        let mut i = 0;
        for z in [0.0, d.height_m] {
            for (x, y) in [(0.0, 0.0), (d.length_m, 0.0), (d.length_m, w), (0.0, w)] {
                out[i] = WorldPoint::new(x, y, z);
                i += 1;
            }
        }
        out
    }

    /// World endpoints of the three annotated car axes.
    pub fn axis_endpoints(&self) -> [WorldPoint; 3] {
        let d = &self.car_dims;
        [
            WorldPoint::new(d.length_m, 0.0, 0.0),
            WorldPoint::new(0.0, self.width_sign * d.width_m, 0.0),
            WorldPoint::new(0.0, 0.0, d.height_m),
        ]
    }

    /// True vanishing point of a world axis.
    pub fn vanishing_point(&self, axis: Axis) -> Result<VanishingPoint> {
        let d = self.intrinsics.matrix() * self.pose.rotation.column(axis);
        VanishingPoint::from_homogeneous(d)
    }
}

fn look_at(camera: &Vector3<f64>, target: &Vector3<f64>, roll_deg: f64) -> Result<Rotation> {
    let f = (target - camera).normalize();
    let right = f.cross(&Vector3::z());
    if right.norm() < 1e-6 {
        return Err(Error::Degenerate);
    }
    let right = right.normalize();
    let down = f.cross(&right);
    let base = Matrix3::from_rows(&[right.transpose(), down.transpose(), f.transpose()]);
    let roll = Rotation::from_axis_angle(Vector3::z(), roll_deg.to_radians());
    crate::geometry::nearest_rotation(&(roll.matrix() * base))
}

/// Clips a 2D segment to the rectangle `[0, w] × [0, h]`.
fn clip_segment(a: PixelPoint, b: PixelPoint, w: f64, h: f64) -> Option<(PixelPoint, PixelPoint)> {
    let (dx, dy) = (b.u - a.u, b.v - a.v);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [(-dx, a.u), (dx, w - a.u), (-dy, a.v), (dy, h - a.v)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 >= t1 {
        return None;
    }
    let at = |t: f64| PixelPoint::new(a.u + t * dx, a.v + t * dy);
    Some((at(t0), at(t1)))
}

fn in_frame(p: PixelPoint, size: ImageSize, margin: f64) -> bool {
    p.u >= margin && p.v >= margin && p.u <= f64::from(size.width) - margin && p.v <= f64::from(size.height) - margin
}

/// Depth of a world point in the camera frame.
fn depth(pose: &CameraPose, p: WorldPoint) -> f64 {
    pose.world_to_camera(p).z
}

/// Visible part of a world segment, as the world segment whose projection is
/// the clipped image segment.
fn visible_part(
    k: &Intrinsics,
    pose: &CameraPose,
    size: ImageSize,
    seg: WorldSegment,
    min_px: f64,
) -> Option<(WorldSegment, LineSegment2D)> {
    if depth(pose, seg.0) < 0.5 || depth(pose, seg.1) < 0.5 {
        return None;
    }
    let pa = project_to_pixel(k, pose, seg.0).ok()?.pixel;
    let pb = project_to_pixel(k, pose, seg.1).ok()?.pixel;
    let (ca, cb) = clip_segment(pa, pb, f64::from(size.width), f64::from(size.height))?;
    if ca.distance(cb) < min_px {
        return None;
    }
    // lift the clipped pixels back to the world line for exact re-projection
    let lift = |p: PixelPoint| -> WorldPoint {
        let ray = k.unproject(p);
        let rc = pose.rotation.matrix().transpose();
        let origin = camera_position_world(pose).to_vector();
        let dir = rc * ray;
        let a = seg.0.to_vector();
        let u = seg.1.to_vector() - a;
        // closest point on the world line to the viewing ray
        let w0 = a - origin;
        let (b, c, d, e) = (u.dot(&dir), dir.dot(&dir), u.dot(&w0), dir.dot(&w0));
        let uu = u.dot(&u);
        let den = uu * c - b * b;
        let s = if den.abs() > 1e-15 { (b * e - c * d) / den } else { 0.0 };
        WorldPoint::from_vector(&(a + u * s))
    };
    let (wa, wb) = (lift(ca), lift(cb));
    let pa = project_to_pixel(k, pose, wa).ok()?.pixel;
    let pb = project_to_pixel(k, pose, wb).ok()?.pixel;
    let s = LineSegment2D::new(pa, pb).ok()?;
    Some(((wa, wb), s))
}

fn car_edges(dims: &CarDimensions, ws: f64) -> [Vec<WorldSegment>; 3] {
    let (l, w, h) = (dims.length_m, ws * dims.width_m, dims.height_m);
    let p = WorldPoint::new;
    [
        alloc::vec![
            (p(0.0, 0.0, 0.0), p(l, 0.0, 0.0)),
            (p(0.0, 0.0, h), p(l, 0.0, h)),
            (p(0.0, w, 0.0), p(l, w, 0.0)),
            (p(0.0, w, h), p(l, w, h)),
        ],
        alloc::vec![
            (p(0.0, 0.0, 0.0), p(0.0, w, 0.0)),
            (p(l, 0.0, 0.0), p(l, w, 0.0)),
            (p(0.0, 0.0, h), p(0.0, w, h)),
            (p(l, 0.0, h), p(l, w, h)),
        ],
        alloc::vec![
            (p(0.0, 0.0, 0.0), p(0.0, 0.0, h)),
            (p(l, 0.0, 0.0), p(l, 0.0, h)),
            (p(l, w, 0.0), p(l, w, h)),
            (p(0.0, w, 0.0), p(0.0, w, h)),
        ],
    ]
}

fn environment_line(rng: &mut impl Rng, axis: Axis, dims: &CarDimensions, ws: f64) -> WorldSegment {
    let (l, w) = (dims.length_m, dims.width_m);
    let p = WorldPoint::new;
    let height = |rng: &mut dyn rand::RngCore| if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.5..8.0) };
    match axis {
        Axis::X => {
            // curbs between the car and the camera, building edges beyond the car
            let y = if rng.gen_bool(0.5) {
                -rng.gen_range(0.3..3.0)
            } else {
                w + rng.gen_range(2.0..12.0)
            };
            let z = height(rng);
            let cx = rng.gen_range(-5.0..l + 5.0);
            let half = 0.5 * rng.gen_range(6.0..25.0);
            (p(cx - half, ws * y, z), p(cx + half, ws * y, z))
        }
        Axis::Y => {
            let x = rng.gen_range(-15.0..l + 15.0);
            let z = height(rng);
            let y0 = -rng.gen_range(0.0..8.0);
            let len = rng.gen_range(4.0..15.0);
            (p(x, ws * y0, z), p(x, ws * (y0 + len), z))
        }
        Axis::Z => {
            let x = rng.gen_range(-10.0..l + 10.0);
            let y = rng.gen_range(-4.0..w + 10.0);
            let top = rng.gen_range(2.5..8.0);
            (p(x, ws * y, 0.0), p(x, ws * y, top))
        }
    }
}

fn orientation_gap_deg(a: &LineSegment2D, b: &LineSegment2D) -> f64 {
    let d = (a.orientation_deg() - b.orientation_deg()).abs();
    d.min(180.0 - d)
}

/// Deterministic scene for a seed.
pub fn generate_scene(seed: u64, cfg: &SceneConfig) -> Result<SyntheticScene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(scene) = try_scene(seed, cfg, &mut rng)? {
            return Ok(scene);
        }
    }
    Err(Error::Unsatisfiable {
        attempts: MAX_ATTEMPTS,
    })
}

fn try_scene(seed: u64, cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Result<Option<SyntheticScene>> {
    let size = cfg.image_size;
    let dims = cfg.car_dims;
    let f = cfg.focal_px.sample(rng);
    let j = cfg.principal_jitter_px;
    let jitter = |rng: &mut ChaCha8Rng| if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 };
    let cx = f64::from(size.width) / 2.0 + jitter(rng);
    let cy = f64::from(size.height) / 2.0 + jitter(rng);
    let k = Intrinsics::new(f, f, cx, cy)?;

    let ws = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let height = cfg.camera_height_m.sample(rng);
    let dist = cfg.car_distance_m.sample(rng);
    let beta = cfg.relative_azimuth_deg.sample(rng);
    let target = Vector3::new(
        0.5 * dims.length_m + rng.gen_range(-1.0..=1.0),
        ws * (0.5 * dims.width_m + rng.gen_range(-0.5..=0.5)),
        rng.gen_range(0.2..=1.2),
    );
    let (sb, cb) = sincos_deg(beta);
    let camera = Vector3::new(target.x - dist * cb, target.y - ws * dist * sb, height);
    let pitch = atan2_deg(height - target.z, dist);
    if pitch < cfg.min_pitch_deg {
        return Ok(None);
    }
    let roll = if cfg.max_roll_deg > 0.0 {
        rng.gen_range(-cfg.max_roll_deg..=cfg.max_roll_deg)
    } else {
        0.0
    };
    let rotation = look_at(&camera, &target, roll)?;
    let pose = CameraPose::from_position(rotation, WorldPoint::from_vector(&camera));

    let street = cfg.street_bearing_deg.sample(rng);
    let car_yaw = if rng.gen_bool(0.5) {
        street
    } else {
        normalize_deg(street + 180.0)
    };
    let anchor = GeoCoordinate::new(cfg.anchor_lat.sample(rng), normalize_deg(cfg.anchor_lon.sample(rng)))?;

    let mut scene = SyntheticScene {
        seed,
        image_size: size,
        intrinsics: k,
        pose,
        camera_geo: anchor,
        camera_height_m: height,
        car_dims: dims,
        car_yaw_deg: car_yaw,
        street_bearing_deg: street,
        width_sign: ws,
        anchor,
        line_pool: [Vec::new(), Vec::new(), Vec::new()],
        refs: Vec::new(),
        intersection: None,
    };
    scene.camera_geo = scene.world_to_geo(scene.camera_position())?;

    // origin must be the nearest bottom corner and the whole car in view
    let c = scene.camera_position();
    let corners = scene.car_corners();
    if corners[1..4].iter().any(|p| p.distance(c) <= corners[0].distance(c)) {
        return Ok(None);
    }
    for p in corners {
        if depth(&pose, p) < 1.0 || !in_frame(scene.project(p)?, size, 5.0) {
            return Ok(None);
        }
    }
    for axis in Axis::ALL {
        let vp = scene.vanishing_point(axis)?;
        match vp.pixel() {
            Some(p) if p.distance(PixelPoint::new(k.cx, k.cy)) <= cfg.max_vp_distance_f * f => {}
            _ => return Ok(None),
        }
    }

    // line pools: car edges within the orientation window, then environment lines
    let edges = car_edges(&dims, ws);
    for axis in Axis::ALL {
        let i = axis.index();
        let reference = LineSegment2D::new(scene.project(edges[i][0].0)?, scene.project(edges[i][0].1)?)?;
        let accept = |s: &LineSegment2D| orientation_gap_deg(s, &reference) <= cfg.max_line_deviation_deg;
        let mut pool: Vec<WorldSegment> = Vec::new();
        for &e in &edges[i] {
            if let Some((w, s)) = visible_part(&k, &pose, size, e, cfg.min_line_px.min(reference.length())) {
                if accept(&s) {
                    pool.push(w);
                }
            }
        }
        let mut tries = 0;
        let mut env = 0;
        while env < cfg.env_lines_per_axis && tries < 50 * (cfg.env_lines_per_axis + 1) {
            tries += 1;
            let e = environment_line(rng, axis, &dims, ws);
            if let Some((w, s)) = visible_part(&k, &pose, size, e, cfg.min_line_px) {
                if accept(&s) {
                    pool.push(w);
                    env += 1;
                }
            }
        }
        if pool.len() < cfg.lines_per_annotator.1 {
            return Ok(None);
        }
        scene.line_pool[i] = pool;
    }

    // ground references
    let (w, h) = (f64::from(size.width), f64::from(size.height));
    let mut refs: Vec<(WorldPoint, PixelPoint)> = Vec::new();
    let mut tries = 0;
    while refs.len() < cfg.ref_count {
        tries += 1;
        if tries > 200 {
            return Ok(None);
        }
        let px = PixelPoint::new(rng.gen_range(0.05 * w..0.95 * w), rng.gen_range(0.3 * h..0.95 * h));
        let Ok(g) = pixel_to_ground(&k, &pose, px) else {
            continue;
        };
        if g.ground_distance(c) > cfg.max_ref_distance_m {
            continue;
        }
        let px = scene.project(g)?;
        let bearing = |p: WorldPoint| atan2_deg(p.y - c.y, p.x - c.x);
        let separated = |q: &(WorldPoint, PixelPoint)| {
            let gap = normalize_deg(bearing(q.0) - bearing(g)).abs();
            (q.1.u - px.u).abs() >= cfg.min_ref_separation_px
                && gap >= cfg.min_ref_angle_deg
                && gap <= 180.0 - cfg.min_ref_angle_deg
        };
        if refs.iter().all(separated) {
            refs.push((g, px));
        }
    }
    scene.refs = refs.into_iter().map(|(g, _)| g).collect();

    if let Some(ic) = &cfg.intersection {
        match try_intersection(&scene, ic, rng)? {
            Some(i) => scene.intersection = Some(i),
            None => return Ok(None),
        }
    }
    Ok(Some(scene))
}

fn try_intersection(
    scene: &SyntheticScene,
    ic: &IntersectionConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<SyntheticIntersection>> {
    let a = ic.street_width_m.sample(rng);
    let b = ic.street_width_m.sample(rng);
    if (a - b).abs() < ic.min_width_difference_m {
        return Ok(None);
    }
    let c = scene.camera_position();
    let fwd = scene.pose.rotation.matrix().row(2).transpose();
    let horiz = hypot(fwd.x, fwd.y);
    if horiz < 1e-6 {
        return Ok(None);
    }
    let d = ic.distance_m.sample(rng);
    let spread = rng.gen_range(-0.3..=0.3);
    let (s, co) = (libm::sin(spread), libm::cos(spread));
    let (ux, uy) = (fwd.x / horiz, fwd.y / horiz);
    let (dx, dy) = (ux * co - uy * s, ux * s + uy * co);
    let center = (c.x + d * dx, c.y + d * dy);
    let (hx, hy) = (0.5 * a, 0.5 * b);
    // clockwise seen from above
    let corners_world: Vec<WorldPoint> = [(hx, hy), (hx, -hy), (-hx, -hy), (-hx, hy)]
        .iter()
        .map(|&(x, y)| WorldPoint::new(center.0 + x, center.1 + y, 0.0))
        .collect();
    let n = corners_world.len();
    let mut seen = [false; 4];
    for (i, &p) in corners_world.iter().enumerate() {
        seen[i] = depth(&scene.pose, p) > 1.0 && in_frame(scene.project(p)?, scene.image_size, 10.0);
    }
    let count = seen.iter().filter(|&&v| v).count();
    if count < ic.min_visible.max(1) {
        return Ok(None);
    }
    // contiguous run: start where a visible corner follows a hidden one
    let start = if count == n {
        0
    } else {
        match (0..n).find(|&i| seen[i] && !seen[(i + n - 1) % n]) {
            Some(s) => s,
            None => return Ok(None),
        }
    };
    let visible: Vec<usize> = (0..count).map(|j| (start + j) % n).collect();
    if !visible.iter().all(|&i| seen[i]) {
        return Ok(None);
    }
    let corner_geos = corners_world.iter().map(|&p| scene.world_to_geo(p)).collect::<Result<Vec<_>>>()?;
    Ok(Some(SyntheticIntersection {
        corners_world,
        corner_geos,
        visible,
    }))
}

fn noisy(p: PixelPoint, noise: &Option<Normal<f64>>, rng: &mut impl Rng) -> PixelPoint {
    match noise {
        Some(n) => PixelPoint::new(p.u + n.sample(rng), p.v + n.sample(rng)),
        None => p,
    }
}

/// One bundle per simulated annotator with Gaussian endpoint noise `noise_px`.
pub fn render_bundles(
    scene: &SyntheticScene,
    annotator_count: usize,
    noise_px: f64,
    seed: u64,
) -> Result<Vec<AnnotationBundle>> {
    render_bundles_with(scene, annotator_count, noise_px, seed, (3, 4))
}

pub fn render_bundles_with(
    scene: &SyntheticScene,
    annotator_count: usize,
    noise_px: f64,
    seed: u64,
    lines_per_annotator: (usize, usize),
) -> Result<Vec<AnnotationBundle>> {
    if !(noise_px >= 0.0) || !noise_px.is_finite() {
        return Err(Error::InvalidArgument("noise must be non-negative"));
    }
    let noise = if noise_px > 0.0 {
        Some(Normal::new(0.0, noise_px).map_err(|_| Error::InvalidArgument("noise"))?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ends = scene.axis_endpoints();
    let origin = scene.project(WorldPoint::ORIGIN)?;
    let axis_px = [scene.project(ends[0])?, scene.project(ends[1])?, scene.project(ends[2])?];
    let ref_px = scene.refs.iter().map(|&r| scene.project(r)).collect::<Result<Vec<_>>>()?;
    let ref_geo = scene.refs.iter().map(|&r| scene.world_to_geo(r)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(annotator_count);
    for a in 0..annotator_count {
        let car_axes = loop {
            let pts = [origin, axis_px[0], axis_px[1], axis_px[2]].map(|p| noisy(p, &noise, &mut rng));
            if let Ok(ax) = CarAxesAnnotation::new(pts[0], pts[1], pts[2], pts[3]) {
                break ax;
            }
        };
        let mut sets: [Vec<LineSegment2D>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for axis in Axis::ALL {
            let pool = &scene.line_pool[axis.index()];
            let (lo, hi) = lines_per_annotator;
            let want = rng.gen_range(lo..=hi).min(pool.len());
            let picks: Vec<&WorldSegment> = pool.choose_multiple(&mut rng, want).collect();
            for &(wa, wb) in picks {
                let (pa, pb) = (scene.project(wa)?, scene.project(wb)?);
                let seg = loop {
                    if let Ok(s) = LineSegment2D::new(noisy(pa, &noise, &mut rng), noisy(pb, &noise, &mut rng)) {
                        break s;
                    }
                };
                sets[axis.index()].push(seg);
            }
        }
        let [x, y, z] = sets;
        let refs = ref_px
            .iter()
            .zip(&ref_geo)
            .map(|(&p, &geo)| PixelGeoRef {
                pixel: noisy(p, &noise, &mut rng),
                geo,
            })
            .collect::<Vec<_>>();
        let intersection = match &scene.intersection {
            Some(si) => Some(IntersectionContext {
                corner_geos: si.corner_geos.clone(),
                corner_pixels: si
                    .visible
                    .iter()
                    .map(|&i| Ok(noisy(scene.project(si.corners_world[i])?, &noise, &mut rng)))
                    .collect::<Result<Vec<_>>>()?,
                street_bearing_deg: Some(scene.street_bearing_deg),
            }),
            None => None,
        };
        out.push(AnnotationBundle {
            image_id: format!("synthetic-{}", scene.seed),
            image_size: scene.image_size,
            annotator_id: format!("annotator-{a}"),
            car_axes,
            parallel_sets: ParallelSets { x, y, z },
            dims: None,
            refs: if refs.is_empty() { None } else { Some(refs) },
            intersection,
            landmark: None,
        });
    }
    Ok(out)
}

/// Edgelets sampled along the pool lines with angular noise, plus uniform outliers.
///
/// The outlier count is `round(outlier_fraction · count)`.
pub fn render_edgelets(
    scene: &SyntheticScene,
    count: usize,
    noise_deg: f64,
    outlier_fraction: f64,
    seed: u64,
) -> Result<Vec<Edgelet>> {
    if !(0.0..1.0).contains(&outlier_fraction) {
        return Err(Error::InvalidArgument("outlier fraction must lie in [0, 1)"));
    }
    if !(noise_deg >= 0.0) {
        return Err(Error::InvalidArgument("noise must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outliers = libm::round(outlier_fraction * count as f64) as usize;
    let inliers = count - outliers;
    let noise = if noise_deg > 0.0 {
        Some(Normal::new(0.0, noise_deg).map_err(|_| Error::InvalidArgument("noise"))?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(count);
    for i in 0..inliers {
        let axis = Axis::ALL[i % 3];
        let pool = &scene.line_pool[axis.index()];
        let &(wa, wb) = pool.choose(&mut rng).ok_or(Error::EmptyInput)?;
        let t: f64 = rng.gen_range(0.05..0.95);
        let w = WorldPoint::new(wa.x + t * (wb.x - wa.x), wa.y + t * (wb.y - wa.y), wa.z + t * (wb.z - wa.z));
        let p = scene.project(w)?;
        let (pa, pb) = (scene.project(wa)?, scene.project(wb)?);
        let mut dir = [pb.u - pa.u, pb.v - pa.v];
        if let Some(n) = &noise {
            let (s, c) = sincos_deg(n.sample(&mut rng));
            dir = [dir[0] * c - dir[1] * s, dir[0] * s + dir[1] * c];
        }
        out.push(Edgelet::new(p, dir, 1.0)?);
    }
    let (w, h) = (f64::from(scene.image_size.width), f64::from(scene.image_size.height));
    for _ in 0..outliers {
        let p = PixelPoint::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let (s, c) = sincos_deg(rng.gen_range(0.0..180.0));
        out.push(Edgelet::new(p, [c, s], 1.0)?);
    }
    Ok(out)
}

/// Knobs for the virtual-sensor sweep. Measurements use each scene's true
/// camera; only the measured pixels carry noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSweepConfig {
    pub scene: SceneConfig,
    pub trials: usize,
    pub noise_px: f64,
    pub lengths_m: Range,
    pub heights_m: Range,
    /// Ground segments start within this radius of the camera.
    pub max_segment_distance_m: f64,
    /// Building bases lie within this radius of the camera.
    pub max_building_distance_m: f64,
    pub speed_kmh: f64,
    pub fps: f64,
    pub track_frames: u64,
    /// Frame spacing of the tracked samples.
    pub sample_every: u64,
    /// Every tracked position stays within this ground distance of the camera.
    pub max_track_distance_m: f64,
}

impl Default for SensorSweepConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            trials: 200,
            noise_px: 1.0,
            lengths_m: Range::new(10.0, 80.0),
            heights_m: Range::new(3.0, 55.0),
            max_segment_distance_m: 60.0,
            max_building_distance_m: 150.0,
            speed_kmh: 60.0,
            fps: 30.0,
            track_frames: 45,
            sample_every: 3,
            max_track_distance_m: 40.0,
        }
    }
}

/// Relative errors per sensor; failed measurements are counted, not dropped silently.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorReport {
    pub scale_errors: Vec<f64>,
    pub clinometer_errors: Vec<f64>,
    pub radar_errors: Vec<f64>,
    pub scale: Percentiles,
    pub clinometer: Percentiles,
    pub radar: Percentiles,
    pub radar_mean: f64,
    /// Trials where an estimator returned an error.
    pub failures: usize,
    /// Measurements that could not be placed in frame.
    pub skipped: usize,
}

fn place_in_frame<T>(rng: &mut ChaCha8Rng, mut draw: impl FnMut(&mut ChaCha8Rng) -> Option<T>) -> Option<T> {
    (0..MAX_ATTEMPTS).find_map(|_| draw(rng))
}

fn ground_point_near(c: WorldPoint, radius: f64, rng: &mut ChaCha8Rng) -> WorldPoint {
    let r = radius * libm::sqrt(rng.gen_range(0.0..1.0));
    let (s, co) = sincos_deg(rng.gen_range(0.0..360.0));
    WorldPoint::new(c.x + r * co, c.y + r * s, 0.0)
}

/// Scale, clinometer and radar measurements on seeded scenes.
pub fn sensor_sweep(seed: u64, cfg: &SensorSweepConfig) -> Result<SensorReport> {
    use crate::sensors::{virtual_clinometer, virtual_radar, virtual_scale, PixelTrack, MPS_TO_KMH};
    if cfg.trials == 0 {
        return Err(Error::EmptyInput);
    }
    if !(cfg.noise_px >= 0.0) || !(cfg.fps > 0.0) || cfg.sample_every == 0 || cfg.track_frames <= cfg.sample_every {
        return Err(Error::InvalidArgument("sensor sweep knobs out of range"));
    }
    let noise = if cfg.noise_px > 0.0 {
        Some(Normal::new(0.0, cfg.noise_px).map_err(|_| Error::InvalidArgument("noise"))?)
    } else {
        None
    };
    let (mut sc, mut cl, mut ra) = (Vec::new(), Vec::new(), Vec::new());
    let (mut failures, mut skipped) = (0, 0);
    for t in 0..cfg.trials as u64 {
        let scene = generate_scene(seed.wrapping_add(t), &cfg.scene)?;
        let (k, pose) = (scene.intrinsics, scene.pose);
        let c = scene.camera_position();
        let size = scene.image_size;
        let seen = |p: WorldPoint| scene.project(p).ok().filter(|&q| size.contains(q));
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t) ^ 0x5e75_0c0d);

        let placed = place_in_frame(&mut rng, |rng| {
            let len = cfg.lengths_m.sample(rng);
            let a = ground_point_near(c, cfg.max_segment_distance_m, rng);
            let (s, co) = sincos_deg(rng.gen_range(0.0..360.0));
            let b = WorldPoint::new(a.x + len * co, a.y + len * s, 0.0);
            Some((len, seen(a)?, seen(b)?))
        });
        match placed {
            Some((len, pa, pb)) => match virtual_scale(&k, &pose, noisy(pa, &noise, &mut rng), noisy(pb, &noise, &mut rng)) {
                Ok(m) => sc.push((m - len).abs() / len),
                Err(_) => failures += 1,
            },
            None => skipped += 1,
        }

        let placed = place_in_frame(&mut rng, |rng| {
            let h = cfg.heights_m.sample(rng);
            let b = ground_point_near(c, cfg.max_building_distance_m, rng);
            Some((h, seen(b)?, seen(WorldPoint::new(b.x, b.y, h))?))
        });
        match placed {
            Some((h, pb, pt)) => {
                match virtual_clinometer(&k, &pose, noisy(pb, &noise, &mut rng), noisy(pt, &noise, &mut rng)) {
                    Ok(m) => cl.push((m - h).abs() / h),
                    Err(_) => failures += 1,
                }
            }
            None => skipped += 1,
        }

        let step = cfg.speed_kmh / MPS_TO_KMH / cfg.fps;
        let frames: Vec<u64> = (0..cfg.track_frames).step_by(cfg.sample_every as usize).collect();
        let px = place_in_frame(&mut rng, |rng| {
            let a = ground_point_near(c, cfg.max_track_distance_m, rng);
            let (s, co) = sincos_deg(rng.gen_range(0.0..360.0));
            frames
                .iter()
                .map(|&f| {
                    let p = WorldPoint::new(a.x + step * f as f64 * co, a.y + step * f as f64 * s, 0.0);
                    if p.ground_distance(c) > cfg.max_track_distance_m {
                        None
                    } else {
                        seen(p)
                    }
                })
                .collect::<Option<Vec<_>>>()
        });
        let Some(px) = px else {
            skipped += 1;
            continue;
        };
        let samples = px.iter().zip(&frames).map(|(&p, &f)| (noisy(p, &noise, &mut rng), f)).collect();
        match virtual_radar(&k, &pose, &PixelTrack::new(samples, cfg.fps)?) {
            Ok(m) => ra.push((m - cfg.speed_kmh).abs() / cfg.speed_kmh),
            Err(_) => failures += 1,
        }
    }
    let of = |v: &[f64]| if v.is_empty() { Err(Error::EmptyInput) } else { Percentiles::of(v) };
    Ok(SensorReport {
        scale: of(&sc)?,
        clinometer: of(&cl)?,
        radar: of(&ra)?,
        radar_mean: ra.iter().sum::<f64>() / ra.len() as f64,
        scale_errors: sc,
        clinometer_errors: cl,
        radar_errors: ra,
        failures,
        skipped,
    })
}

/// An estimate to score against a scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialEstimate {
    /// Camera position in the scene's world frame.
    pub position: WorldPoint,
    pub geo: Option<GeoCoordinate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub position_errors_m: Vec<f64>,
    pub height_errors_m: Vec<f64>,
    /// Flat-earth distance to the true camera geo, for trials with a geo estimate.
    pub absolute_errors_m: Vec<f64>,
    pub position: Percentiles,
    pub height: Percentiles,
    pub absolute: Option<Percentiles>,
}

pub fn evaluate_errors(estimates: &[TrialEstimate], scenes: &[SyntheticScene]) -> Result<ErrorReport> {
    if estimates.len() != scenes.len() {
        return Err(Error::LengthMismatch {
            estimates: estimates.len(),
            truths: scenes.len(),
        });
    }
    if estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut pos = Vec::with_capacity(estimates.len());
    let mut hgt = Vec::with_capacity(estimates.len());
    let mut abs = Vec::new();
    for (e, s) in estimates.iter().zip(scenes) {
        let truth = s.camera_position();
        pos.push(e.position.distance(truth));
        hgt.push((e.position.z - truth.z).abs());
        if let Some(g) = e.geo {
            abs.push(crate::geodesy::geo_distance_m(s.camera_geo, g));
        }
    }
    Ok(ErrorReport {
        position: Percentiles::of(&pos)?,
        height: Percentiles::of(&hgt)?,
        absolute: if abs.is_empty() { None } else { Some(Percentiles::of(&abs)?) },
        position_errors_m: pos,
        height_errors_m: hgt,
        absolute_errors_m: abs,
    })
}

/// Short label used in diagnostics.
pub fn scene_label(scene: &SyntheticScene) -> String {
    format!("seed={} f={:.1}", scene.seed, scene.intrinsics.fx)
}
