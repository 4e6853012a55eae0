use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::Axis;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point lies behind the camera (camera-frame depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("matrix is singular (smallest singular value {smallest})")]
    Singular { smallest: f64 },
    #[error("matrix is not a rotation: {0}")]
    InvalidRotation(&'static str),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),

    #[error("segment endpoints closer than 2 px")]
    DegenerateSegment,
    #[error("segments do not determine a unique vanishing point")]
    Degenerate,
    #[error("vanishing point for the {0} axis is at infinity")]
    InfiniteVanishingPoint(Axis),
    #[error("vanishing points closer than 1 px")]
    CoincidentVanishingPoints,
    #[error("vanishing point triangle is degenerate (area {area} px²)")]
    DegenerateTriangle { area: f64 },
    #[error("focal estimate is not positive (residual {residual})")]
    NonPositiveFocal { residual: f64 },
    #[error("insufficient RANSAC inliers for axes {0:?}")]
    InsufficientInliers(Vec<Axis>),

    #[error("vanishing directions are inconsistent with a rotation (distance {distance})")]
    NotARotation { distance: f64 },
    #[error("closed-form translation is singular for the chosen axis")]
    ParallelProjection,
    #[error("world origin is not in front of the camera")]
    NegativeDepth,
    #[error("car dimensions out of range: {0}")]
    InvalidDimensions(&'static str),
    #[error("annotator {id}: {source}")]
    Annotator { id: String, source: Box<Error> },
    #[error("empty input")]
    EmptyInput,

    #[error("pixel ray is parallel to the ground plane")]
    HorizonRay,
    #[error("top pixel is {residual_px} px away from the vertical above the base")]
    VerticalInconsistent { residual_px: f64 },
    #[error("track has fewer than two samples")]
    TooShort,
    #[error("invalid track: {0}")]
    InvalidTrack(&'static str),

    #[error("invalid geodetic coordinate ({lat}, {lon})")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("offset of {distance_m} m exceeds the flat-earth range")]
    RangeExceeded { distance_m: f64 },
    #[error("reference latitude {lat} too close to a pole")]
    PolarSingularity { lat: f64 },
    #[error("circles do not intersect")]
    NoIntersection,
    #[error("reference pixels share the same column, ordering is ambiguous")]
    AmbiguousOrdering,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),

    #[error("no corner mapping satisfies the circle constraints")]
    MappingInfeasible,
    #[error("footprint has {vertices} vertices, simplify it to at most 12")]
    FootprintTooComplex { vertices: usize },
    #[error("invalid context: {0}")]
    InvalidContext(&'static str),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("scene sampling gave up after {attempts} attempts")]
    Unsatisfiable { attempts: usize },
    #[error("estimate and truth lists differ in length ({estimates} vs {truths})")]
    LengthMismatch { estimates: usize, truths: usize },

    #[error("no bundle produced a relative pose")]
    AllBundlesInvalid,
    #[error("missing context: {0}")]
    MissingContext(&'static str),
}

impl Error {
    pub(crate) fn for_annotator(self, id: &str) -> Error {
        Error::Annotator {
            id: id.into(),
            source: Box::new(self),
        }
    }

    /// Strips annotator tagging.
    pub fn root(&self) -> &Error {
        match self {
            Error::Annotator { source, .. } => source.root(),
            e => e,
        }
    }
}
