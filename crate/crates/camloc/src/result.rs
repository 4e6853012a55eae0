//! Pipeline result documents.

use camloc_core::geodesy::CandidateLocation;
use camloc_core::geometry::{nearest_rotation, CameraPose, Intrinsics, Rotation, Translation, WorldPoint};
use camloc_core::nalgebra::Matrix3;
use camloc_core::pipeline::{AbsoluteSource, PipelineResult, QualityScores};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::schema::{GeoDoc, Versioned, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsDoc {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl From<Intrinsics> for IntrinsicsDoc {
    fn from(k: Intrinsics) -> Self {
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
        }
    }
}

/// World-to-camera rotation (row-major) and translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDoc {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<&CameraPose> for PoseDoc {
    fn from(p: &CameraPose) -> Self {
        let r = p.rotation.matrix();
        Self {
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: [p.translation.tx, p.translation.ty, p.translation.tz],
        }
    }
}

/// Orthonormality slack accepted for rotations written with few decimals.
const ROUNDED_SO3: f64 = 1e-4;

/// A calibrated camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDoc {
    pub intrinsics: IntrinsicsDoc,
    pub pose: PoseDoc,
}

impl CameraDoc {
    pub fn to_core(&self, path: &str) -> AppResult<(Intrinsics, CameraPose)> {
        let i = self.intrinsics;
        let k = Intrinsics::new(i.fx, i.fy, i.cx, i.cy).map_err(|_| AppError::Invariant {
            name: format!("{path}.intrinsics.positive_focal"),
        })?;
        let r = self.pose.rotation;
        let m = Matrix3::from_row_slice(&[r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]]);
        // hand-edited documents may carry rounded entries
        let near = (m * m.transpose() - Matrix3::identity()).norm() < ROUNDED_SO3 && m.determinant() > 0.0;
        let rotation = match Rotation::from_matrix(m) {
            Ok(r) => r,
            Err(_) if near => nearest_rotation(&m)?,
            Err(_) => {
                return Err(AppError::Invariant {
                    name: format!("{path}.pose.rotation.so3"),
                })
            }
        };
        let [tx, ty, tz] = self.pose.translation;
        Ok((
            k,
            CameraPose {
                rotation,
                translation: Translation::new(tx, ty, tz),
            },
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateDoc {
    pub geo: GeoDoc,
    pub height_m: f64,
    pub branch: String,
    pub distance_to_ref_m: f64,
}

impl From<&CandidateLocation> for CandidateDoc {
    fn from(c: &CandidateLocation) -> Self {
        Self {
            geo: c.geo.into(),
            height_m: c.height_m,
            branch: c.branch.clone(),
            distance_to_ref_m: c.distance_to_ref_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceDoc {
    TwoRefs,
    OneRef,
    Intersection,
    Landmark,
}

impl From<AbsoluteSource> for SourceDoc {
    fn from(s: AbsoluteSource) -> Self {
        match s {
            AbsoluteSource::TwoRefs => SourceDoc::TwoRefs,
            AbsoluteSource::OneRef => SourceDoc::OneRef,
            AbsoluteSource::Intersection => SourceDoc::Intersection,
            AbsoluteSource::Landmark => SourceDoc::Landmark,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityDoc {
    pub total_bundles: usize,
    pub valid_bundles: usize,
    pub candidate_count: usize,
    pub cluster_size: usize,
    pub cluster_variance_m2: f64,
    pub intrinsics_residual: f64,
}

impl From<&QualityScores> for QualityDoc {
    fn from(q: &QualityScores) -> Self {
        Self {
            total_bundles: q.total_bundles,
            valid_bundles: q.valid_bundles,
            candidate_count: q.candidate_count,
            cluster_size: q.cluster_size,
            cluster_variance_m2: q.cluster_variance_m2,
            intrinsics_residual: q.intrinsics_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDoc {
    pub version: u32,
    pub intrinsics: IntrinsicsDoc,
    pub pose: PoseDoc,
    /// Camera position in the car frame, meters.
    pub camera_position: [f64; 3],
    pub candidates: Vec<CandidateDoc>,
    pub absolute_source: Option<SourceDoc>,
    pub quality: QualityDoc,
    pub warnings: Vec<String>,
}

impl Versioned for ResultDoc {
    fn version(&self) -> u32 {
        self.version
    }
}

impl ResultDoc {
    pub fn camera(&self) -> CameraDoc {
        CameraDoc {
            intrinsics: self.intrinsics,
            pose: self.pose,
        }
    }

    pub fn position(&self) -> WorldPoint {
        let [x, y, z] = self.camera_position;
        WorldPoint::new(x, y, z)
    }
}

impl From<&PipelineResult> for ResultDoc {
    fn from(r: &PipelineResult) -> Self {
        let p = r.camera_position;
        Self {
            version: VERSION,
            intrinsics: r.intrinsics.into(),
            pose: (&r.pose).into(),
            camera_position: [p.x, p.y, p.z],
            candidates: r.candidates.iter().map(CandidateDoc::from).collect(),
            absolute_source: r.absolute_source.map(SourceDoc::from),
            quality: (&r.quality).into(),
            warnings: r.warnings.clone(),
        }
    }
}
