//! Relative and absolute runs shared by the CLI and the service.

use camloc_core::annotation::AnnotationBundle;
use camloc_core::extrinsics::{CarDimensions, DEFAULT_CLUSTER_RADIUS_M};
use camloc_core::geodesy::PixelGeoRef;
use camloc_core::pipeline::{run_pipeline, PipelineContext, PipelineResult};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::map::{MapIntersection, MapLandmark};
use crate::schema::{refs_to_core, BundleDoc, DimsDoc, RefDoc, Versioned};

/// Pixel→geo references for the `absolute` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefsDoc {
    pub version: u32,
    pub refs: Vec<RefDoc>,
    /// Needed with a single reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub street_bearing_deg: Option<f64>,
}

impl Versioned for RefsDoc {
    fn version(&self) -> u32 {
        self.version
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelativeRequest {
    pub version: u32,
    pub bundles: Vec<BundleDoc>,
    #[serde(default)]
    pub dims: Option<DimsDoc>,
    #[serde(default)]
    pub cluster_radius_m: Option<f64>,
}

impl Versioned for RelativeRequest {
    fn version(&self) -> u32 {
        self.version
    }
}

/// Bundles plus exactly one source of absolute context; with none, only
/// context carried by the bundles is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsoluteRequest {
    pub version: u32,
    pub bundles: Vec<BundleDoc>,
    #[serde(default)]
    pub dims: Option<DimsDoc>,
    #[serde(default)]
    pub cluster_radius_m: Option<f64>,
    #[serde(default)]
    pub refs: Option<Vec<RefDoc>>,
    #[serde(default)]
    pub intersection: Option<MapIntersection>,
    #[serde(default)]
    pub landmark: Option<MapLandmark>,
    #[serde(default)]
    pub street_bearing_deg: Option<f64>,
}

impl Versioned for AbsoluteRequest {
    fn version(&self) -> u32 {
        self.version
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AbsoluteContext {
    /// Only what the bundles carry.
    Bundles,
    Refs(Vec<PixelGeoRef>),
    Intersection(MapIntersection),
    Landmark(MapLandmark),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Overrides the dimensions carried by the bundles.
    pub dims: Option<CarDimensions>,
    pub cluster_radius_m: f64,
    pub street_bearing_deg: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            dims: None,
            cluster_radius_m: DEFAULT_CLUSTER_RADIUS_M,
            street_bearing_deg: None,
        }
    }
}

/// Explicit dimensions, else the first bundle that carries some, else a
/// typical sedan.
pub fn resolve_dims(explicit: Option<CarDimensions>, bundles: &[AnnotationBundle]) -> CarDimensions {
    explicit
        .or_else(|| bundles.iter().find_map(|b| b.dims))
        .unwrap_or_default()
}

fn check_radius(r: f64) -> AppResult<f64> {
    if r > 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(AppError::Usage {
            message: format!("cluster radius must be positive, got {r}"),
            field_path: Some("cluster_radius_m".into()),
        })
    }
}

pub fn bundles_from_docs(docs: &[BundleDoc]) -> AppResult<Vec<AnnotationBundle>> {
    if docs.is_empty() {
        return Err(AppError::missing("bundles"));
    }
    docs.iter()
        .enumerate()
        .map(|(i, d)| {
            d.to_core().map_err(|e| match e {
                AppError::Invariant { name } => AppError::Invariant {
                    name: format!("bundles[{i}].{name}"),
                },
                e => e,
            })
        })
        .collect()
}

/// Relative pose plus whatever absolute context the bundles carry.
pub fn relative(bundles: &[AnnotationBundle], opts: &RunOptions) -> AppResult<PipelineResult> {
    let ctx = PipelineContext {
        cluster_radius_m: check_radius(opts.cluster_radius_m)?,
        street_bearing_deg: opts.street_bearing_deg,
        ..PipelineContext::default()
    };
    Ok(run_pipeline(bundles, &resolve_dims(opts.dims, bundles), &ctx)?)
}

fn missing_annotations(what: &str) -> AppError {
    AppError::Invariant {
        name: format!("bundles.{what}.missing"),
    }
}

/// Map corners replace the ones the bundles carry; pixels stay.
fn apply_intersection(bundles: &mut [AnnotationBundle], m: &MapIntersection) -> AppResult<()> {
    let corners = m.corners("intersection")?;
    let mut any = false;
    for b in bundles.iter_mut() {
        if let Some(i) = &mut b.intersection {
            i.corner_geos = corners.clone();
            i.street_bearing_deg = i.street_bearing_deg.or(m.street_bearing_deg);
            i.check()?;
            any = true;
        }
    }
    if any {
        Ok(())
    } else {
        Err(missing_annotations("intersection"))
    }
}

fn apply_landmark(bundles: &mut [AnnotationBundle], m: &MapLandmark) -> AppResult<()> {
    let footprint = m.footprint("landmark")?;
    let tag = m.geo_tag.to_core("landmark.geo_tag")?;
    let mut any = false;
    for b in bundles.iter_mut() {
        if let Some(l) = &mut b.landmark {
            l.geo_tag = tag;
            l.footprint = footprint.clone();
            l.street_bearing_deg = l.street_bearing_deg.or(m.street_bearing_deg);
            l.check()?;
            any = true;
        }
    }
    if any {
        Ok(())
    } else {
        Err(missing_annotations("landmark"))
    }
}

/// Full pipeline; fails with [`AppError::NoCandidates`] when no absolute
/// location could be produced.
pub fn absolute(bundles: &[AnnotationBundle], opts: &RunOptions, context: &AbsoluteContext) -> AppResult<PipelineResult> {
    let mut bundles = bundles.to_vec();
    let mut ctx = PipelineContext {
        cluster_radius_m: check_radius(opts.cluster_radius_m)?,
        street_bearing_deg: opts.street_bearing_deg,
        ..PipelineContext::default()
    };
    match context {
        AbsoluteContext::Bundles => {}
        AbsoluteContext::Refs(r) => {
            if r.is_empty() {
                return Err(AppError::missing("refs"));
            }
            ctx.refs = Some(r.clone());
        }
        AbsoluteContext::Intersection(m) => apply_intersection(&mut bundles, m)?,
        AbsoluteContext::Landmark(m) => apply_landmark(&mut bundles, m)?,
    }
    let r = run_pipeline(&bundles, &resolve_dims(opts.dims, &bundles), &ctx)?;
    if r.candidates.is_empty() {
        let why = if r.warnings.is_empty() {
            "no references or map context".to_string()
        } else {
            r.warnings.join("; ")
        };
        return Err(AppError::NoCandidates(why));
    }
    Ok(r)
}

impl RelativeRequest {
    pub fn run(&self) -> AppResult<PipelineResult> {
        let bundles = bundles_from_docs(&self.bundles)?;
        let opts = RunOptions {
            dims: self.dims.map(|d| d.to_core("dims")).transpose()?,
            cluster_radius_m: self.cluster_radius_m.unwrap_or(DEFAULT_CLUSTER_RADIUS_M),
            street_bearing_deg: None,
        };
        relative(&bundles, &opts)
    }
}

impl AbsoluteRequest {
    pub fn context(&self) -> AppResult<AbsoluteContext> {
        let given = [self.refs.is_some(), self.intersection.is_some(), self.landmark.is_some()];
        if given.iter().filter(|&&g| g).count() > 1 {
            return Err(AppError::usage("give at most one of `refs`, `intersection`, `landmark`"));
        }
        Ok(if let Some(r) = &self.refs {
            AbsoluteContext::Refs(refs_to_core(r, "refs")?)
        } else if let Some(i) = &self.intersection {
            AbsoluteContext::Intersection(i.clone())
        } else if let Some(l) = &self.landmark {
            AbsoluteContext::Landmark(l.clone())
        } else {
            AbsoluteContext::Bundles
        })
    }

    pub fn run(&self) -> AppResult<PipelineResult> {
        let bundles = bundles_from_docs(&self.bundles)?;
        let opts = RunOptions {
            dims: self.dims.map(|d| d.to_core("dims")).transpose()?,
            cluster_radius_m: self.cluster_radius_m.unwrap_or(DEFAULT_CLUSTER_RADIUS_M),
            street_bearing_deg: self.street_bearing_deg,
        };
        absolute(&bundles, &opts, &self.context()?)
    }
}
