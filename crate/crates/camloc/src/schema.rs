//! Annotation bundle documents.
//!
//! Pixels are `[u, v]`, segments `[[u, v], [u, v]]`, geodetic coordinates
//! `{"lat": deg, "lon": deg}`. Unknown fields are rejected and every
//! document carries `"version": 1`.

use camloc_core::annotation::{AnnotationBundle, ImageSize, ParallelSets};
use camloc_core::context::{IntersectionContext, LandmarkContext, LandmarkMode};
use camloc_core::extrinsics::{CarAxesAnnotation, CarDimensions};
use camloc_core::geodesy::{GeoCoordinate, PixelGeoRef};
use camloc_core::geometry::PixelPoint;
use camloc_core::vanishing::LineSegment2D;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub const VERSION: u32 = 1;

pub type Pixel = [f64; 2];
pub type Segment = [Pixel; 2];

/// Documents with a top-level schema version.
pub trait Versioned {
    fn version(&self) -> u32;
}

/// Parses a versioned document, reporting the failing field path.
pub fn parse_doc<T: DeserializeOwned + Versioned>(bytes: &[u8]) -> AppResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let doc: T = serde_path_to_error::deserialize(de).map_err(schema_error)?;
    if doc.version() != VERSION {
        return Err(AppError::Schema {
            path: "version".into(),
            message: format!("unsupported version {}, expected {VERSION}", doc.version()),
        });
    }
    Ok(doc)
}

fn schema_error(e: serde_path_to_error::Error<serde_json::Error>) -> AppError {
    let mut path = e.path().to_string();
    let message = e.inner().to_string();
    // serde reports a missing field at its parent
    if let Some(field) = message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
        path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
    }
    AppError::Schema { path, message }
}

/// Canonical on-disk form: objects one field per line with two-space
/// indent, arrays of at most two nesting levels on one line (pixels,
/// segments, matrices), field order as declared, trailing newline.
pub fn to_canonical<T: Serialize>(doc: &T) -> String {
    let v = serde_json::to_value(doc).expect("documents serialize");
    let mut out = String::new();
    write_canonical(&v, 0, &mut out);
    out.push('\n');
    out
}

fn array_depth(v: &serde_json::Value) -> Option<usize> {
    use serde_json::Value;
    match v {
        Value::Object(_) => None,
        Value::Array(items) => {
            let mut d = 0;
            for i in items {
                d = d.max(array_depth(i)?);
            }
            Some(d + 1)
        }
        _ => Some(0),
    }
}

fn write_inline(v: &serde_json::Value, out: &mut String) {
    match v {
        serde_json::Value::Array(items) => {
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_inline(x, out);
            }
            out.push(']');
        }
        x => out.push_str(&x.to_string()),
    }
}

fn write_canonical(v: &serde_json::Value, indent: usize, out: &mut String) {
    use serde_json::Value;
    let pad = |n: usize, out: &mut String| out.push_str(&" ".repeat(n));
    match v {
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                pad(indent + 2, out);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_canonical(x, indent + 2, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push('}');
        }
        Value::Array(items) if !items.is_empty() && array_depth(v).is_none_or(|d| d > 2) => {
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                pad(indent + 2, out);
                write_canonical(x, indent + 2, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push(']');
        }
        Value::Object(_) => out.push_str("{}"),
        x => write_inline(x, out),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoDoc {
    pub lat: f64,
    pub lon: f64,
}

impl GeoDoc {
    pub fn to_core(self, path: &str) -> AppResult<GeoCoordinate> {
        GeoCoordinate::new(self.lat, self.lon).map_err(|_| invariant(path, "range"))
    }
}

impl From<GeoCoordinate> for GeoDoc {
    fn from(g: GeoCoordinate) -> Self {
        Self { lat: g.lat, lon: g.lon }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsDoc {
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl DimsDoc {
    pub fn to_core(self, path: &str) -> AppResult<CarDimensions> {
        CarDimensions::new(self.length_m, self.width_m, self.height_m).map_err(|_| invariant(path, "range"))
    }
}

impl From<CarDimensions> for DimsDoc {
    fn from(d: CarDimensions) -> Self {
        Self {
            length_m: d.length_m,
            width_m: d.width_m,
            height_m: d.height_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarAxesDoc {
    pub origin: Pixel,
    pub x_end: Pixel,
    pub y_end: Pixel,
    pub z_end: Pixel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelSetsDoc {
    pub x: Vec<Segment>,
    pub y: Vec<Segment>,
    pub z: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefDoc {
    pub pixel: Pixel,
    pub geo: GeoDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionDoc {
    /// Map corners, clockwise.
    pub corner_geos: Vec<GeoDoc>,
    /// Successive visible corners, clockwise.
    pub corner_pixels: Vec<Pixel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub street_bearing_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeDoc {
    FaceCenter,
    Corner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkDoc {
    pub geo_tag: GeoDoc,
    pub footprint: Vec<GeoDoc>,
    pub mode: ModeDoc,
    pub annotated_pixels: Vec<Pixel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub street_bearing_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleDoc {
    pub version: u32,
    pub image_id: String,
    /// `[width, height]` in pixels.
    pub image_size: [u32; 2],
    pub annotator_id: String,
    pub car_axes: CarAxesDoc,
    pub parallel_sets: ParallelSetsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<DimsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refs: Option<Vec<RefDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intersection: Option<IntersectionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmark: Option<LandmarkDoc>,
}

impl Versioned for BundleDoc {
    fn version(&self) -> u32 {
        self.version
    }
}

fn invariant(path: &str, what: &str) -> AppError {
    AppError::Invariant {
        name: format!("{path}.{what}"),
    }
}

pub fn pixel(p: Pixel) -> PixelPoint {
    PixelPoint::new(p[0], p[1])
}

pub fn pixel_doc(p: PixelPoint) -> Pixel {
    [p.u, p.v]
}

pub fn segment(s: Segment, path: &str) -> AppResult<LineSegment2D> {
    LineSegment2D::new(pixel(s[0]), pixel(s[1])).map_err(|_| invariant(path, "degenerate"))
}

pub fn segment_doc(s: &LineSegment2D) -> Segment {
    [pixel_doc(s.a), pixel_doc(s.b)]
}

fn geos(list: &[GeoDoc], path: &str) -> AppResult<Vec<GeoCoordinate>> {
    list.iter()
        .enumerate()
        .map(|(i, g)| g.to_core(&format!("{path}[{i}]")))
        .collect()
}

fn segments(list: &[Segment], path: &str) -> AppResult<Vec<LineSegment2D>> {
    list.iter()
        .enumerate()
        .map(|(i, &s)| segment(s, &format!("{path}[{i}]")))
        .collect()
}

impl IntersectionDoc {
    pub fn to_core(&self, path: &str) -> AppResult<IntersectionContext> {
        let ctx = IntersectionContext {
            corner_geos: geos(&self.corner_geos, &format!("{path}.corner_geos"))?,
            corner_pixels: self.corner_pixels.iter().copied().map(pixel).collect(),
            street_bearing_deg: self.street_bearing_deg,
        };
        ctx.check()?;
        Ok(ctx)
    }
}

impl From<&IntersectionContext> for IntersectionDoc {
    fn from(c: &IntersectionContext) -> Self {
        Self {
            corner_geos: c.corner_geos.iter().copied().map(GeoDoc::from).collect(),
            corner_pixels: c.corner_pixels.iter().copied().map(pixel_doc).collect(),
            street_bearing_deg: c.street_bearing_deg,
        }
    }
}

impl LandmarkDoc {
    pub fn to_core(&self, path: &str) -> AppResult<LandmarkContext> {
        let ctx = LandmarkContext {
            geo_tag: self.geo_tag.to_core(&format!("{path}.geo_tag"))?,
            footprint: geos(&self.footprint, &format!("{path}.footprint"))?,
            mode: match self.mode {
                ModeDoc::FaceCenter => LandmarkMode::FaceCenter,
                ModeDoc::Corner => LandmarkMode::Corner,
            },
            annotated_pixels: self.annotated_pixels.iter().copied().map(pixel).collect(),
            street_bearing_deg: self.street_bearing_deg,
        };
        ctx.check()?;
        Ok(ctx)
    }
}

impl From<&LandmarkContext> for LandmarkDoc {
    fn from(c: &LandmarkContext) -> Self {
        Self {
            geo_tag: c.geo_tag.into(),
            footprint: c.footprint.iter().copied().map(GeoDoc::from).collect(),
            mode: match c.mode {
                LandmarkMode::FaceCenter => ModeDoc::FaceCenter,
                LandmarkMode::Corner => ModeDoc::Corner,
            },
            annotated_pixels: c.annotated_pixels.iter().copied().map(pixel_doc).collect(),
            street_bearing_deg: c.street_bearing_deg,
        }
    }
}

pub fn refs_to_core(refs: &[RefDoc], path: &str) -> AppResult<Vec<PixelGeoRef>> {
    refs.iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(PixelGeoRef {
                pixel: pixel(r.pixel),
                geo: r.geo.to_core(&format!("{path}[{i}].geo"))?,
            })
        })
        .collect()
}

pub fn ref_doc(r: &PixelGeoRef) -> RefDoc {
    RefDoc {
        pixel: pixel_doc(r.pixel),
        geo: r.geo.into(),
    }
}

impl BundleDoc {
    /// Converts to a bundle and checks its structural invariants.
    pub fn to_core(&self) -> AppResult<AnnotationBundle> {
        let [w, h] = self.image_size;
        let a = &self.car_axes;
        let bundle = AnnotationBundle {
            image_id: self.image_id.clone(),
            image_size: ImageSize::new(w, h).map_err(|_| invariant("image_size", "positive"))?,
            annotator_id: self.annotator_id.clone(),
            car_axes: CarAxesAnnotation::new(pixel(a.origin), pixel(a.x_end), pixel(a.y_end), pixel(a.z_end))?,
            parallel_sets: ParallelSets {
                x: segments(&self.parallel_sets.x, "parallel_sets.x")?,
                y: segments(&self.parallel_sets.y, "parallel_sets.y")?,
                z: segments(&self.parallel_sets.z, "parallel_sets.z")?,
            },
            dims: self.dims.map(|d| d.to_core("dims")).transpose()?,
            refs: self.refs.as_deref().map(|r| refs_to_core(r, "refs")).transpose()?,
            intersection: self.intersection.as_ref().map(|i| i.to_core("intersection")).transpose()?,
            landmark: self.landmark.as_ref().map(|l| l.to_core("landmark")).transpose()?,
        };
        bundle.check_invariants()?;
        Ok(bundle)
    }
}

impl From<&AnnotationBundle> for BundleDoc {
    fn from(b: &AnnotationBundle) -> Self {
        let a = &b.car_axes;
        let sets = |s: &[LineSegment2D]| s.iter().map(segment_doc).collect();
        Self {
            version: VERSION,
            image_id: b.image_id.clone(),
            image_size: [b.image_size.width, b.image_size.height],
            annotator_id: b.annotator_id.clone(),
            car_axes: CarAxesDoc {
                origin: pixel_doc(a.origin),
                x_end: pixel_doc(a.x_end),
                y_end: pixel_doc(a.y_end),
                z_end: pixel_doc(a.z_end),
            },
            parallel_sets: ParallelSetsDoc {
                x: sets(&b.parallel_sets.x),
                y: sets(&b.parallel_sets.y),
                z: sets(&b.parallel_sets.z),
            },
            dims: b.dims.map(DimsDoc::from),
            refs: b.refs.as_ref().map(|r| r.iter().map(ref_doc).collect()),
            intersection: b.intersection.as_ref().map(IntersectionDoc::from),
            landmark: b.landmark.as_ref().map(LandmarkDoc::from),
        }
    }
}

/// Parses and validates one bundle document.
pub fn parse_bundle(bytes: &[u8]) -> AppResult<AnnotationBundle> {
    parse_doc::<BundleDoc>(bytes)?.to_core()
}

/// Canonical document for a bundle.
pub fn serialize_bundle(b: &AnnotationBundle) -> String {
    to_canonical(&BundleDoc::from(b))
}
