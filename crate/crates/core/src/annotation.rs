//! One annotator's markup of one image, its validity report and the
//! car bounding-box heuristic.

use alloc::string::String;
use alloc::vec::Vec;

use crate::context::{IntersectionContext, LandmarkContext};
use crate::extrinsics::{CarAxesAnnotation, CarDimensions};
use crate::geodesy::PixelGeoRef;
use crate::geometry::{Axis, PixelPoint};
use crate::math::sqrt;
use crate::vanishing::LineSegment2D;
use crate::{Error, Result};

/// Minimum segments per parallel set.
pub const MIN_SET_SEGMENTS: usize = 2;

/// Largest undirected orientation span tolerated inside one parallel set.
pub const MAX_SET_SPAN_DEG: f64 = 60.0;

/// A bundle is invalid once more than this fraction of its pixels leaves the frame.
pub const MAX_OUT_OF_FRAME_FRACTION: f64 = 0.5;

/// RMS distance from the best-fit line below which the axis points are collinear.
pub const COLLINEAR_SPREAD_PX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvariantViolation("image_size.positive".into()));
        }
        Ok(Self { width, height })
    }

    pub fn center(&self) -> PixelPoint {
        PixelPoint::new(f64::from(self.width) / 2.0, f64::from(self.height) / 2.0)
    }

    pub fn contains(&self, p: PixelPoint) -> bool {
        (0.0..=f64::from(self.width)).contains(&p.u) && (0.0..=f64::from(self.height)).contains(&p.v)
    }

    /// Inside the image box scaled 4× about its center.
    pub fn within_sanity_bounds(&self, p: PixelPoint) -> bool {
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        let c = self.center();
        p.is_finite() && (p.u - c.u).abs() <= 2.0 * w && (p.v - c.v).abs() <= 2.0 * h
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParallelSets {
    pub x: Vec<LineSegment2D>,
    pub y: Vec<LineSegment2D>,
    pub z: Vec<LineSegment2D>,
}

impl ParallelSets {
    pub fn get(&self, axis: Axis) -> &[LineSegment2D] {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationBundle {
    pub image_id: String,
    pub image_size: ImageSize,
    pub annotator_id: String,
    pub car_axes: CarAxesAnnotation,
    pub parallel_sets: ParallelSets,
    pub dims: Option<CarDimensions>,
    pub refs: Option<Vec<PixelGeoRef>>,
    pub intersection: Option<IntersectionContext>,
    pub landmark: Option<LandmarkContext>,
}

impl AnnotationBundle {
    /// Every pixel the bundle carries.
    pub fn pixels(&self) -> Vec<PixelPoint> {
        let mut out: Vec<PixelPoint> = self.car_axes.points().to_vec();
        for axis in Axis::ALL {
            for s in self.parallel_sets.get(axis) {
                out.push(s.a);
                out.push(s.b);
            }
        }
        if let Some(refs) = &self.refs {
            out.extend(refs.iter().map(|r| r.pixel));
        }
        if let Some(i) = &self.intersection {
            out.extend_from_slice(&i.corner_pixels);
        }
        if let Some(l) = &self.landmark {
            out.extend_from_slice(&l.annotated_pixels);
        }
        out
    }

    /// Structural invariants: non-empty ids, enough segments per set, all
    /// pixels within the sanity bounds. Returns the failed invariant name.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |name: &str| Err(Error::InvariantViolation(name.into()));
        if self.image_id.is_empty() {
            return fail("image_id.non_empty");
        }
        if self.annotator_id.is_empty() {
            return fail("annotator_id.non_empty");
        }
        for axis in Axis::ALL {
            if self.parallel_sets.get(axis).len() < MIN_SET_SEGMENTS {
                return Err(Error::InvariantViolation(alloc::format!(
                    "parallel_sets.{}.min_segments",
                    axis.name()
                )));
            }
        }
        if !self.pixels().iter().all(|&p| self.image_size.within_sanity_bounds(p)) {
            return fail("pixels.within_bounds");
        }
        if let Some(i) = &self.intersection {
            i.check()?;
        }
        if let Some(l) = &self.landmark {
            l.check()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidityFlag {
    AxesDegenerate,
    ParallelSetInconsistent(Axis),
    OutOfFrame,
}

impl ValidityFlag {
    pub fn name(self) -> &'static str {
        match self {
            ValidityFlag::AxesDegenerate => "axes-degenerate",
            ValidityFlag::ParallelSetInconsistent(Axis::X) => "parallel-set-inconsistent:x",
            ValidityFlag::ParallelSetInconsistent(Axis::Y) => "parallel-set-inconsistent:y",
            ValidityFlag::ParallelSetInconsistent(Axis::Z) => "parallel-set-inconsistent:z",
            ValidityFlag::OutOfFrame => "out-of-frame",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub flags: Vec<ValidityFlag>,
    pub out_of_frame_fraction: f64,
    /// Undirected orientation span per set, degrees.
    pub set_spans_deg: [f64; 3],
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.flags.is_empty()
    }
}

/// RMS distance of the points from their total-least-squares line.
fn line_spread(points: &[PixelPoint]) -> f64 {
    let n = points.len() as f64;
    let (mu, mv) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.u / n, b + p.v / n));
    let (mut suu, mut suv, mut svv) = (0.0, 0.0, 0.0);
    for p in points {
        let (du, dv) = (p.u - mu, p.v - mv);
        suu += du * du;
        suv += du * dv;
        svv += dv * dv;
    }
    // smaller eigenvalue of the 2×2 scatter matrix
    let half_tr = 0.5 * (suu + svv);
    let det = suu * svv - suv * suv;
    let disc = sqrt((half_tr * half_tr - det).max(0.0));
    sqrt(((half_tr - disc).max(0.0)) / n)
}

/// Smallest arc of the 180° orientation circle covering every segment.
pub fn orientation_span_deg(segments: &[LineSegment2D]) -> f64 {
    if segments.len() < 2 {
        return 0.0;
    }
    let mut angles: Vec<f64> = segments.iter().map(|s| s.orientation_deg()).collect();
    angles.sort_by(f64::total_cmp);
    let mut max_gap = angles[0] + 180.0 - angles[angles.len() - 1];
    for w in angles.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    180.0 - max_gap
}

pub fn validate_bundle(b: &AnnotationBundle) -> ValidityReport {
    let mut flags = Vec::new();
    if line_spread(&b.car_axes.points()) < COLLINEAR_SPREAD_PX {
        flags.push(ValidityFlag::AxesDegenerate);
    }
    let spans = Axis::ALL.map(|a| orientation_span_deg(b.parallel_sets.get(a)));
    for axis in Axis::ALL {
        if spans[axis.index()] > MAX_SET_SPAN_DEG {
            flags.push(ValidityFlag::ParallelSetInconsistent(axis));
        }
    }
    let pixels = b.pixels();
    let outside = pixels.iter().filter(|&&p| !b.image_size.contains(p)).count();
    let fraction = outside as f64 / pixels.len() as f64;
    if fraction > MAX_OUT_OF_FRAME_FRACTION {
        flags.push(ValidityFlag::OutOfFrame);
    }
    ValidityReport {
        flags,
        out_of_frame_fraction: fraction,
        set_spans_deg: spans,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub min: PixelPoint,
    pub max: PixelPoint,
    pub label: String,
}

impl BoundingBox {
    pub fn new(min: PixelPoint, max: PixelPoint, label: impl Into<String>) -> Result<Self> {
        if !(min.u < max.u && min.v < max.v) {
            return Err(Error::InvariantViolation("bbox.min_lt_max".into()));
        }
        Ok(Self {
            min,
            max,
            label: label.into(),
        })
    }

    pub fn area(&self) -> f64 {
        (self.max.u - self.min.u) * (self.max.v - self.min.v)
    }

    pub fn center(&self) -> PixelPoint {
        PixelPoint::new(0.5 * (self.min.u + self.max.u), 0.5 * (self.min.v + self.max.v))
    }
}

/// Area over center distance to the image center, the distance floored at 1 px.
pub fn bbox_score(b: &BoundingBox, image_size: ImageSize) -> f64 {
    b.area() / b.center().distance(image_size.center()).max(1.0)
}

/// Index of the highest-scoring box, first index on ties.
pub fn select_car_bbox_index(boxes: &[BoundingBox], image_size: ImageSize) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, b) in boxes.iter().enumerate() {
        let s = bbox_score(b, image_size);
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyInput)
}

pub fn select_car_bbox(boxes: &[BoundingBox], image_size: ImageSize) -> Result<BoundingBox> {
    select_car_bbox_index(boxes, image_size).map(|i| boxes[i].clone())
}
