//! Vanishing-point previews: least squares over annotated parallel sets, or
//! seeded RANSAC over edgelets.

use camloc_core::geometry::Axis;
use camloc_core::vanishing::{
    estimate_vp, orthocenter_image_center, ransac_vps, solve_intrinsics, Edgelet, RansacConfig, VanishingPoint,
    VanishingTriple,
};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::result::IntrinsicsDoc;
use crate::schema::{pixel, pixel_doc, segment, Pixel, Segment, Versioned, VERSION};

/// Per-axis segment lists; any subset may be present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialSetsDoc {
    #[serde(default)]
    pub x: Option<Vec<Segment>>,
    #[serde(default)]
    pub y: Option<Vec<Segment>>,
    #[serde(default)]
    pub z: Option<Vec<Segment>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeletDoc {
    pub center: Pixel,
    pub direction: [f64; 2],
    #[serde(default = "unit_strength")]
    pub strength: f64,
}

fn unit_strength() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintsDoc {
    pub x: Segment,
    pub y: Segment,
    pub z: Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RansacDoc {
    pub iterations: usize,
    pub inlier_angle_deg: f64,
    pub hint_cone_deg: f64,
    pub min_inliers: usize,
}

impl Default for RansacDoc {
    fn default() -> Self {
        let c = RansacConfig::default();
        Self {
            iterations: c.iterations,
            inlier_angle_deg: c.inlier_angle_deg,
            hint_cone_deg: c.hint_cone_deg,
            min_inliers: c.min_inliers,
        }
    }
}

/// Either `sets`, or `edgelets` with `axis_hints` and a mandatory `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VpRequest {
    pub version: u32,
    #[serde(default)]
    pub sets: Option<PartialSetsDoc>,
    #[serde(default)]
    pub edgelets: Option<Vec<EdgeletDoc>>,
    #[serde(default)]
    pub axis_hints: Option<HintsDoc>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub ransac: Option<RansacDoc>,
}

impl Versioned for VpRequest {
    fn version(&self) -> u32 {
        self.version
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VpDoc {
    /// Unit homogeneous vector.
    pub homogeneous: [f64; 3],
    /// `None` for a point at infinity.
    pub pixel: Option<Pixel>,
}

impl From<&VanishingPoint> for VpDoc {
    fn from(v: &VanishingPoint) -> Self {
        let h = v.homogeneous();
        Self {
            homogeneous: [h.x, h.y, h.z],
            pixel: v.pixel().map(pixel_doc),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VpAxesDoc {
    pub x: Option<VpDoc>,
    pub y: Option<VpDoc>,
    pub z: Option<VpDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VpResponse {
    pub version: u32,
    pub vanishing_points: VpAxesDoc,
    pub orthocenter: Option<Pixel>,
    pub intrinsics: Option<IntrinsicsDoc>,
    pub intrinsics_residual: Option<f64>,
    /// Advisory messages for axes or stages that could not be computed.
    pub warnings: Vec<String>,
}

fn slot(d: &mut VpAxesDoc, axis: Axis) -> &mut Option<VpDoc> {
    match axis {
        Axis::X => &mut d.x,
        Axis::Y => &mut d.y,
        Axis::Z => &mut d.z,
    }
}

fn with_triple(t: &VanishingTriple, out: &mut VpResponse) {
    match orthocenter_image_center(t) {
        Ok(c) => out.orthocenter = Some(pixel_doc(c)),
        Err(e) => out.warnings.push(format!("orthocenter: {e}")),
    }
    match solve_intrinsics(t) {
        Ok(fit) => {
            out.intrinsics = Some(fit.intrinsics.into());
            out.intrinsics_residual = Some(fit.residual);
        }
        Err(e) => out.warnings.push(format!("intrinsics: {e}")),
    }
}

fn from_sets(sets: &PartialSetsDoc, out: &mut VpResponse) -> AppResult<()> {
    let mut found: [Option<VanishingPoint>; 3] = [None; 3];
    for axis in Axis::ALL {
        let list = match axis {
            Axis::X => &sets.x,
            Axis::Y => &sets.y,
            Axis::Z => &sets.z,
        };
        let Some(list) = list else { continue };
        let segs = list
            .iter()
            .enumerate()
            .map(|(i, &s)| segment(s, &format!("sets.{}[{i}]", axis.name())))
            .collect::<AppResult<Vec<_>>>()?;
        if segs.len() < 2 {
            out.warnings.push(format!("{}: at least two segments are needed", axis.name()));
            continue;
        }
        match estimate_vp(&segs) {
            Ok(v) => {
                *slot(&mut out.vanishing_points, axis) = Some((&v).into());
                found[axis.index()] = Some(v);
            }
            Err(e) => out.warnings.push(format!("{}: {e}", axis.name())),
        }
    }
    if let [Some(x), Some(y), Some(z)] = found {
        match VanishingTriple::new(x, y, z) {
            Ok(t) => with_triple(&t, out),
            Err(e) => out.warnings.push(format!("triple: {e}")),
        }
    }
    Ok(())
}

fn from_edgelets(req: &VpRequest, edgelets: &[EdgeletDoc], out: &mut VpResponse) -> AppResult<()> {
    let seed = req.seed.ok_or_else(|| AppError::missing("seed"))?;
    let hints = req.axis_hints.ok_or_else(|| AppError::missing("axis_hints"))?;
    let es = edgelets
        .iter()
        .enumerate()
        .map(|(i, e)| {
            Edgelet::new(pixel(e.center), e.direction, e.strength).map_err(|_| AppError::Invariant {
                name: format!("edgelets[{i}].direction"),
            })
        })
        .collect::<AppResult<Vec<_>>>()?;
    let hints = [
        segment(hints.x, "axis_hints.x")?,
        segment(hints.y, "axis_hints.y")?,
        segment(hints.z, "axis_hints.z")?,
    ];
    let r = req.ransac.unwrap_or_default();
    let cfg = RansacConfig {
        iterations: r.iterations,
        inlier_angle_deg: r.inlier_angle_deg,
        hint_cone_deg: r.hint_cone_deg,
        min_inliers: r.min_inliers,
    };
    let t = ransac_vps(&es, &hints, &cfg, seed)?;
    for axis in Axis::ALL {
        *slot(&mut out.vanishing_points, axis) = Some(t.get(axis).into());
    }
    with_triple(&t, out);
    Ok(())
}

/// Vanishing points, orthocenter and intrinsics for a preview request.
pub fn vanishing_points(req: &VpRequest) -> AppResult<VpResponse> {
    let mut out = VpResponse {
        version: VERSION,
        vanishing_points: VpAxesDoc::default(),
        orthocenter: None,
        intrinsics: None,
        intrinsics_residual: None,
        warnings: Vec::new(),
    };
    match (&req.sets, &req.edgelets) {
        (Some(sets), None) => from_sets(sets, &mut out)?,
        (None, Some(e)) => from_edgelets(req, e, &mut out)?,
        (Some(_), Some(_)) => {
            return Err(AppError::Usage {
                message: "give either `sets` or `edgelets`, not both".into(),
                field_path: Some("edgelets".into()),
            })
        }
        (None, None) => return Err(AppError::missing("sets")),
    }
    Ok(out)
}
