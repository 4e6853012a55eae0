//! End-to-end estimation over a batch of annotation bundles for one image.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Matrix3;

use crate::annotation::{validate_bundle, AnnotationBundle};
use crate::context::{intersection_candidates_ranked, landmark_candidates, IntersectionContext, LandmarkContext};
use crate::extrinsics::{largest_cluster, relative_pose_candidates, CarDimensions, RelativePoseCandidate};
use crate::geodesy::{absolute_from_one_ref, absolute_from_two_refs, CandidateLocation, PixelGeoRef};
use crate::geometry::{nearest_rotation, CameraPose, Intrinsics, PixelPoint, WorldPoint};
use crate::sensors::pixel_to_ground;
use crate::{Error, Result};

/// Inputs beyond the bundles themselves; overrides take precedence over
/// anything carried in the bundles.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineContext {
    pub cluster_radius_m: f64,
    /// Needed for one-reference and one-corner cases.
    pub street_bearing_deg: Option<f64>,
    pub refs: Option<Vec<PixelGeoRef>>,
    pub intersection: Option<IntersectionContext>,
    pub landmark: Option<LandmarkContext>,
}

impl Default for PipelineContext {
    fn default() -> Self {
        Self {
            cluster_radius_m: crate::extrinsics::DEFAULT_CLUSTER_RADIUS_M,
            street_bearing_deg: None,
            refs: None,
            intersection: None,
            landmark: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbsoluteSource {
    TwoRefs,
    OneRef,
    Intersection,
    Landmark,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityScores {
    pub total_bundles: usize,
    pub valid_bundles: usize,
    pub candidate_count: usize,
    pub cluster_size: usize,
    /// Mean squared distance of cluster members to the aggregated position.
    pub cluster_variance_m2: f64,
    /// Mean orthogonality residual of the clustered candidates.
    pub intrinsics_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub intrinsics: Intrinsics,
    pub pose: CameraPose,
    /// Camera position in the car frame, meters.
    pub camera_position: WorldPoint,
    pub candidates: Vec<CandidateLocation>,
    pub absolute_source: Option<AbsoluteSource>,
    pub quality: QualityScores,
    pub warnings: Vec<String>,
}

/// Relative pose from every valid bundle, aggregated by the largest cluster.
pub struct RelativeEstimate {
    pub intrinsics: Intrinsics,
    pub pose: CameraPose,
    pub camera_position: WorldPoint,
    pub quality: QualityScores,
    pub warnings: Vec<String>,
    /// Indices of the bundles that passed validation.
    pub valid: Vec<usize>,
}

pub fn estimate_relative(bundles: &[AnnotationBundle], dims: &CarDimensions, radius_m: f64) -> Result<RelativeEstimate> {
    if bundles.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut warnings = Vec::new();
    let mut valid = Vec::new();
    let mut candidates: Vec<RelativePoseCandidate> = Vec::new();
    let mut first_error: Option<Error> = None;
    for (i, b) in bundles.iter().enumerate() {
        let who = if b.annotator_id.is_empty() {
            format!("bundle {i}")
        } else {
            b.annotator_id.clone()
        };
        if let Err(e) = b.check_invariants() {
            warnings.push(format!("{who}: skipped, {e}"));
            continue;
        }
        let report = validate_bundle(b);
        if !report.is_valid() {
            let names: Vec<&str> = report.flags.iter().map(|f| f.name()).collect();
            warnings.push(format!("{who}: skipped, invalid ({})", names.join(", ")));
            continue;
        }
        valid.push(i);
        match relative_pose_candidates(b, &b.dims.unwrap_or(*dims)) {
            Ok(c) => candidates.extend(c),
            Err(e) => {
                warnings.push(format!("{who}: {}", e.root()));
                first_error.get_or_insert(e);
            }
        }
    }
    if valid.is_empty() {
        return Err(Error::AllBundlesInvalid);
    }
    if candidates.is_empty() {
        return Err(first_error.unwrap_or(Error::EmptyInput));
    }
    let positions: Vec<WorldPoint> = candidates.iter().map(|c| c.camera_position()).collect();
    let cluster = largest_cluster(&positions, radius_m)?;
    let n = cluster.members.len() as f64;
    let (mut fx, mut fy, mut cx, mut cy, mut res) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut rsum = Matrix3::zeros();
    for &m in &cluster.members {
        let c = &candidates[m];
        fx += c.intrinsics.fx;
        fy += c.intrinsics.fy;
        cx += c.intrinsics.cx;
        cy += c.intrinsics.cy;
        res += c.quality;
        rsum += c.pose.rotation.matrix();
    }
    let intrinsics = Intrinsics::new(fx / n, fy / n, cx / n, cy / n)?;
    let rotation = nearest_rotation(&rsum)?;
    let pose = CameraPose::from_position(rotation, cluster.centroid);
    Ok(RelativeEstimate {
        intrinsics,
        pose,
        camera_position: cluster.centroid,
        quality: QualityScores {
            total_bundles: bundles.len(),
            valid_bundles: valid.len(),
            candidate_count: candidates.len(),
            cluster_size: cluster.members.len(),
            cluster_variance_m2: cluster.variance,
            intrinsics_residual: res / n,
        },
        warnings,
        valid,
    })
}

/// Same-geo references merged across bundles by averaging their pixels,
/// in first-seen order.
pub fn merge_refs<'a>(lists: impl IntoIterator<Item = &'a [PixelGeoRef]>) -> Vec<PixelGeoRef> {
    let mut acc: Vec<(PixelGeoRef, f64, f64, usize)> = Vec::new();
    for list in lists {
        for r in list {
            match acc.iter_mut().find(|(a, ..)| a.geo == r.geo) {
                Some((_, su, sv, n)) => {
                    *su += r.pixel.u;
                    *sv += r.pixel.v;
                    *n += 1;
                }
                None => acc.push((*r, r.pixel.u, r.pixel.v, 1)),
            }
        }
    }
    acc.into_iter()
        .map(|(r, su, sv, n)| PixelGeoRef {
            pixel: PixelPoint::new(su / n as f64, sv / n as f64),
            geo: r.geo,
        })
        .collect()
}

fn average_pixels(lists: &[&[PixelPoint]]) -> Vec<PixelPoint> {
    let n = lists.len() as f64;
    (0..lists[0].len())
        .map(|j| {
            let (su, sv) = lists.iter().fold((0.0, 0.0), |(a, b), l| (a + l[j].u, b + l[j].v));
            PixelPoint::new(su / n, sv / n)
        })
        .collect()
}

fn merged_intersection(bundles: &[&AnnotationBundle]) -> Option<IntersectionContext> {
    let first = bundles.iter().find_map(|b| b.intersection.as_ref())?;
    let same: Vec<&[PixelPoint]> = bundles
        .iter()
        .filter_map(|b| b.intersection.as_ref())
        .filter(|i| i.corner_geos == first.corner_geos && i.corner_pixels.len() == first.corner_pixels.len())
        .map(|i| i.corner_pixels.as_slice())
        .collect();
    Some(IntersectionContext {
        corner_pixels: average_pixels(&same),
        ..first.clone()
    })
}

fn merged_landmark(bundles: &[&AnnotationBundle]) -> Option<LandmarkContext> {
    let first = bundles.iter().find_map(|b| b.landmark.as_ref())?;
    let same: Vec<&[PixelPoint]> = bundles
        .iter()
        .filter_map(|b| b.landmark.as_ref())
        .filter(|l| {
            l.footprint == first.footprint
                && l.mode == first.mode
                && l.annotated_pixels.len() == first.annotated_pixels.len()
        })
        .map(|l| l.annotated_pixels.as_slice())
        .collect();
    Some(LandmarkContext {
        annotated_pixels: average_pixels(&same),
        ..first.clone()
    })
}

/// Index pair with the widest horizontal pixel separation.
fn widest(refs: &[PixelGeoRef]) -> (usize, usize) {
    let mut best = (0, 1, -1.0);
    for i in 0..refs.len() {
        for j in i + 1..refs.len() {
            let du = (refs[i].pixel.u - refs[j].pixel.u).abs();
            if du > best.2 {
                best = (i, j, du);
            }
        }
    }
    (best.0, best.1)
}

fn from_refs(
    refs: &[PixelGeoRef],
    k: &Intrinsics,
    pose: &CameraPose,
    camera: WorldPoint,
    bearing: Option<f64>,
) -> Result<(Vec<CandidateLocation>, AbsoluteSource)> {
    if refs.len() >= 2 {
        let (i, j) = widest(refs);
        let g1 = pixel_to_ground(k, pose, refs[i].pixel)?;
        let g2 = pixel_to_ground(k, pose, refs[j].pixel)?;
        let c = absolute_from_two_refs(refs[i], refs[j], camera - g1, camera - g2)?;
        return Ok((alloc::vec![c], AbsoluteSource::TwoRefs));
    }
    let bearing = bearing.ok_or(Error::MissingContext("street_bearing_deg"))?;
    let g = pixel_to_ground(k, pose, refs[0].pixel)?;
    Ok((absolute_from_one_ref(camera - g, refs[0].geo, bearing)?, AbsoluteSource::OneRef))
}

/// Validate, estimate per-bundle relative candidates, aggregate, then resolve
/// absolute candidates from references or map context when available.
pub fn run_pipeline(bundles: &[AnnotationBundle], dims: &CarDimensions, ctx: &PipelineContext) -> Result<PipelineResult> {
    let rel = estimate_relative(bundles, dims, ctx.cluster_radius_m)?;
    let mut warnings = rel.warnings;
    let valid: Vec<&AnnotationBundle> = rel.valid.iter().map(|&i| &bundles[i]).collect();
    let (k, pose, camera) = (rel.intrinsics, rel.pose, rel.camera_position);

    let refs = match &ctx.refs {
        Some(r) => r.clone(),
        None => merge_refs(valid.iter().filter_map(|b| b.refs.as_deref())),
    };
    let intersection = ctx.intersection.clone().or_else(|| merged_intersection(&valid));
    let landmark = ctx.landmark.clone().or_else(|| merged_landmark(&valid));

    let mut candidates = Vec::new();
    let mut source = None;
    if !refs.is_empty() {
        match from_refs(&refs, &k, &pose, camera, ctx.street_bearing_deg) {
            Ok((c, s)) => {
                candidates = c;
                source = Some(s);
            }
            Err(e) => warnings.push(format!("references: {e}")),
        }
    }
    if source.is_none() {
        if let Some(mut ic) = intersection {
            ic.street_bearing_deg = ic.street_bearing_deg.or(ctx.street_bearing_deg);
            match intersection_candidates_ranked(&ic, &k, &pose) {
                Ok(r) => {
                    candidates = r.candidates;
                    source = Some(AbsoluteSource::Intersection);
                }
                Err(e) => warnings.push(format!("intersection: {e}")),
            }
        }
    }
    if source.is_none() {
        if let Some(mut lc) = landmark {
            lc.street_bearing_deg = lc.street_bearing_deg.or(ctx.street_bearing_deg);
            match landmark_candidates(&lc, &k, &pose) {
                Ok(r) => {
                    candidates = r.candidates;
                    source = Some(AbsoluteSource::Landmark);
                    for w in r.warnings {
                        warnings.push(format!("landmark: {w:?}"));
                    }
                }
                Err(e) => warnings.push(format!("landmark: {e}")),
            }
        }
    }
    Ok(PipelineResult {
        intrinsics: k,
        pose,
        camera_position: camera,
        candidates,
        absolute_source: source,
        quality: rel.quality,
        warnings,
    })
}
