//! Flat-earth geodesy: offsets along a bearing, the four-way bearing
//! ambiguity, two-circle intersection and the reference-frame transform.
//!
//! Bearings are degrees clockwise from true north. Local metric frames are
//! (east, north) about a reference point, using the same meters-per-degree
//! constant in both directions so forward and inverse conversions agree.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::{PixelPoint, WorldPoint};
use crate::math::{atan2_deg, cos_deg, hypot, normalize_deg, sincos_deg, sqrt};
use crate::{tol, Error, Result};

/// Meters per degree of latitude.
pub const METERS_PER_DEGREE: f64 = 111_111.0;

/// Offsets at or beyond this distance leave the flat-earth regime.
pub const MAX_OFFSET_M: f64 = 2000.0;

/// Largest reference latitude magnitude accepted by [`offset_geo`].
pub const MAX_ABS_LAT: f64 = 89.0;

/// Minimum horizontal pixel separation for the two-reference ordering rule.
pub const MIN_ORDERING_PX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoCoordinate {
    pub lat: f64,
    pub lon: f64,
}

impl GeoCoordinate {
    /// Validates `lat ∈ [−90, 90]` and `lon ∈ (−180, 180]`.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(lon > -180.0 && lon <= 180.0) {
            return Err(Error::InvalidCoordinate { lat, lon });
        }
        Ok(Self { lat, lon })
    }

    fn wrapped(lat: f64, lon: f64) -> Result<Self> {
        Self::new(lat, normalize_deg(lon))
    }
}

/// A ground pixel with a known geodetic position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGeoRef {
    pub pixel: PixelPoint,
    pub geo: GeoCoordinate,
}

fn check_ref_lat(lat: f64) -> Result<()> {
    if lat.abs() > MAX_ABS_LAT {
        return Err(Error::PolarSingularity { lat });
    }
    Ok(())
}

/// Moves `d_m` meters from `reference` along bearing `alpha_deg`.
pub fn offset_geo(reference: GeoCoordinate, d_m: f64, alpha_deg: f64) -> Result<GeoCoordinate> {
    if !(d_m < MAX_OFFSET_M) || !alpha_deg.is_finite() {
        return Err(Error::RangeExceeded { distance_m: d_m });
    }
    check_ref_lat(reference.lat)?;
    let (lat, lon) = flat_earth_offset(reference, d_m, alpha_deg);
    GeoCoordinate::wrapped(lat, lon)
}

/// The bare offset formula without range checks, as raw `(lat, lon)` degrees.
pub fn flat_earth_offset(reference: GeoCoordinate, d_m: f64, alpha_deg: f64) -> (f64, f64) {
    let (s, c) = sincos_deg(alpha_deg);
    let lat = reference.lat + d_m * c / METERS_PER_DEGREE;
    let lon = reference.lon + d_m * s / (METERS_PER_DEGREE * cos_deg(reference.lat));
    (lat, lon)
}

/// Moves by a local (east, north) meter vector from `reference`.
pub fn offset_local(reference: GeoCoordinate, east_m: f64, north_m: f64) -> Result<GeoCoordinate> {
    let d = hypot(east_m, north_m);
    if !(d < MAX_OFFSET_M) {
        return Err(Error::RangeExceeded { distance_m: d });
    }
    check_ref_lat(reference.lat)?;
    let lat = reference.lat + north_m / METERS_PER_DEGREE;
    let lon = reference.lon + east_m / (METERS_PER_DEGREE * cos_deg(reference.lat));
    GeoCoordinate::wrapped(lat, lon)
}

/// Inverse of [`offset_local`]: the (east, north) meters of `to` seen from `from`.
pub fn local_offset(from: GeoCoordinate, to: GeoCoordinate) -> (f64, f64) {
    let dlon = normalize_deg(to.lon - from.lon);
    let north = (to.lat - from.lat) * METERS_PER_DEGREE;
    let east = dlon * METERS_PER_DEGREE * cos_deg(from.lat);
    (east, north)
}

/// Flat-earth distance in meters.
pub fn geo_distance_m(a: GeoCoordinate, b: GeoCoordinate) -> f64 {
    let (e, n) = local_offset(a, b);
    hypot(e, n)
}

/// Flat-earth bearing from `a` to `b`, degrees in (−180, 180].
pub fn geo_bearing_deg(a: GeoCoordinate, b: GeoCoordinate) -> f64 {
    let (e, n) = local_offset(a, b);
    atan2_deg(e, n)
}

/// One of the four ambiguity branches of the bearing from reference to camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BearingBranch {
    PlusNinetyPlusPhi,
    PlusNinetyMinusPhi,
    MinusNinetyPlusPhi,
    MinusNinetyMinusPhi,
}

impl BearingBranch {
    pub const ALL: [BearingBranch; 4] = [
        BearingBranch::PlusNinetyPlusPhi,
        BearingBranch::PlusNinetyMinusPhi,
        BearingBranch::MinusNinetyPlusPhi,
        BearingBranch::MinusNinetyMinusPhi,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BearingBranch::PlusNinetyPlusPhi => "theta+90+phi",
            BearingBranch::PlusNinetyMinusPhi => "theta+90-phi",
            BearingBranch::MinusNinetyPlusPhi => "theta-90+phi",
            BearingBranch::MinusNinetyMinusPhi => "theta-90-phi",
        }
    }

    fn signs(self) -> (f64, f64) {
        match self {
            BearingBranch::PlusNinetyPlusPhi => (90.0, 1.0),
            BearingBranch::PlusNinetyMinusPhi => (90.0, -1.0),
            BearingBranch::MinusNinetyPlusPhi => (-90.0, 1.0),
            BearingBranch::MinusNinetyMinusPhi => (-90.0, -1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingSet {
    pub theta: f64,
    pub phi: f64,
    /// In [`BearingBranch::ALL`] order.
    pub alphas: [f64; 4],
}

pub fn bearing_candidates(theta_deg: f64, phi_deg: f64) -> BearingSet {
    let alphas = BearingBranch::ALL.map(|b| {
        let (base, sign) = b.signs();
        normalize_deg(theta_deg + base + sign * phi_deg)
    });
    BearingSet {
        theta: theta_deg,
        phi: phi_deg,
        alphas,
    }
}

/// Camera bearing in the world frame such that `θ + 90 + φ` is the true
/// bearing when world `x` points along `θ` and `z` is up.
pub fn world_phi_deg(rel_cam: WorldPoint) -> f64 {
    atan2_deg(-rel_cam.x, -rel_cam.y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLocation {
    pub geo: GeoCoordinate,
    pub height_m: f64,
    /// Which ambiguity choice produced this candidate.
    pub branch: String,
    pub distance_to_ref_m: f64,
}

/// Four candidates, one per bearing branch, in [`BearingBranch::ALL`] order.
///
/// `rel_cam` is the camera position minus the reference ground point, in
/// world meters.
pub fn absolute_from_one_ref(
    rel_cam: WorldPoint,
    reference: GeoCoordinate,
    street_bearing_deg: f64,
) -> Result<Vec<CandidateLocation>> {
    let d = hypot(rel_cam.x, rel_cam.y);
    let phi = world_phi_deg(rel_cam);
    let set = bearing_candidates(street_bearing_deg, phi);
    BearingBranch::ALL
        .iter()
        .zip(set.alphas)
        .map(|(b, alpha)| {
            Ok(CandidateLocation {
                geo: offset_geo(reference, d, alpha)?,
                height_m: rel_cam.z,
                branch: String::from(b.label()),
                distance_to_ref_m: d,
            })
        })
        .collect()
}

/// Intersections of the circle of radius `d1` about (0, 0) with the circle of
/// radius `d2` about (d, 0), positive-`y` point first.
pub fn circle_intersection(d_m: f64, d1_m: f64, d2_m: f64) -> Result<[(f64, f64); 2]> {
    let t = tol::GEOMETRIC;
    if !(d_m > 0.0) || !(d1_m >= 0.0) || !(d2_m >= 0.0) {
        return Err(Error::NoIntersection);
    }
    if d_m > d1_m + d2_m + t || d_m < (d1_m - d2_m).abs() - t {
        return Err(Error::NoIntersection);
    }
    let a = d_m * d_m - d2_m * d2_m + d1_m * d1_m;
    let x = a / (2.0 * d_m);
    let disc = 4.0 * d_m * d_m * d1_m * d1_m - a * a;
    let y = if disc > 0.0 { sqrt(disc) / (2.0 * d_m) } else { 0.0 };
    Ok([(x, y), (x, -y)])
}

/// How local two-reference meters are mapped back to geodetic coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameMapping {
    /// Rotate by the ref1→ref2 bearing and apply the flat-earth offset.
    #[default]
    FlatEarth,
    /// The affine `(p, q, r, s)` transform of [`solve_ref_frame_transform`].
    Affine,
}

/// Affine map from local meters to degrees:
/// `lat = p·x + q·y + r`, `lon = q·x − p·y + s`.
///
/// Local `x` points from ref1 to ref2 and local `y` is 90° counter-clockwise
/// from `x` in (lat, lon) degree space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefFrameTransform {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl RefFrameTransform {
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.p * x + self.q * y + self.r, self.q * x - self.p * y + self.s)
    }
}

pub fn solve_ref_frame_transform(ref1: GeoCoordinate, ref2: GeoCoordinate, d_m: f64) -> Result<RefFrameTransform> {
    if !(d_m >= tol::GEOMETRIC) {
        return Err(Error::Singular { smallest: d_m });
    }
    // rows (0 0 1 0), (0 0 0 1), (d 0 1 0), (0 d 0 1) against (lat1, lon1, lat2, lon2)
    Ok(RefFrameTransform {
        p: (ref2.lat - ref1.lat) / d_m,
        q: normalize_deg(ref2.lon - ref1.lon) / d_m,
        r: ref1.lat,
        s: ref1.lon,
    })
}

/// Camera position from two ground references with known geo.
///
/// `rel1`/`rel2` are the camera position minus each reference's ground
/// point, in world meters.
pub fn absolute_from_two_refs(
    ref1: PixelGeoRef,
    ref2: PixelGeoRef,
    rel1: WorldPoint,
    rel2: WorldPoint,
) -> Result<CandidateLocation> {
    absolute_from_two_refs_with(ref1, ref2, rel1, rel2, FrameMapping::FlatEarth)
}

pub fn absolute_from_two_refs_with(
    ref1: PixelGeoRef,
    ref2: PixelGeoRef,
    rel1: WorldPoint,
    rel2: WorldPoint,
    mapping: FrameMapping,
) -> Result<CandidateLocation> {
    let du = ref2.pixel.u - ref1.pixel.u;
    if !(du.abs() >= MIN_ORDERING_PX) {
        return Err(Error::AmbiguousOrdering);
    }
    let (e, n) = local_offset(ref1.geo, ref2.geo);
    let d = hypot(e, n);
    let d1 = hypot(rel1.x, rel1.y);
    let d2 = hypot(rel2.x, rel2.y);
    let [(x, y), _] = circle_intersection(d, d1, d2)?;
    // y is to the right of ref1→ref2: a camera on that side sees ref1 on the left
    let y = if du > 0.0 { y } else { -y };
    let geo = match mapping {
        FrameMapping::FlatEarth => {
            let (sb, cb) = sincos_deg(atan2_deg(e, n));
            offset_local(ref1.geo, x * sb + y * cb, x * cb - y * sb)?
        }
        FrameMapping::Affine => {
            let (lat, lon) = solve_ref_frame_transform(ref1.geo, ref2.geo, d)?.apply(x, -y);
            GeoCoordinate::wrapped(lat, lon)?
        }
    };
    let side = if y >= 0.0 { "right" } else { "left" };
    Ok(CandidateLocation {
        geo,
        height_m: 0.5 * (rel1.z + rel2.z),
        branch: format!("two-ref:{side}"),
        distance_to_ref_m: d1,
    })
}
