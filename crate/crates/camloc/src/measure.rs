//! Virtual sensor point documents and measurements.

use camloc_core::geometry::{CameraPose, Intrinsics};
use camloc_core::sensors::{clinometer_fit, virtual_radar, virtual_scale, PixelTrack};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::schema::{parse_doc, pixel, Pixel, Versioned, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Scale,
    Height,
    Speed,
}

impl SensorKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "scale" => Some(SensorKind::Scale),
            "height" => Some(SensorKind::Height),
            "speed" => Some(SensorKind::Speed),
            _ => None,
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            SensorKind::Scale | SensorKind::Height => "m",
            SensorKind::Speed => "km/h",
        }
    }
}

/// Two ground pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleDoc {
    pub version: u32,
    pub from: Pixel,
    pub to: Pixel,
}

/// A ground pixel and the pixel vertically above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightDoc {
    pub version: u32,
    pub base: Pixel,
    pub top: Pixel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSampleDoc {
    pub pixel: Pixel,
    pub frame: u64,
}

/// A tracked ground contact point with frame indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedDoc {
    pub version: u32,
    pub fps: f64,
    pub track: Vec<TrackSampleDoc>,
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn version(&self) -> u32 {
                self.version
            }
        }
    )*};
}

versioned!(ScaleDoc, HeightDoc, SpeedDoc);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementDoc {
    pub version: u32,
    pub kind: SensorKind,
    pub value: f64,
    pub unit: String,
    /// Clinometer only: pixel distance between `top` and the fitted vertical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_px: Option<f64>,
}

impl MeasurementDoc {
    fn new(kind: SensorKind, value: f64, residual_px: Option<f64>) -> Self {
        Self {
            version: VERSION,
            kind,
            value,
            unit: kind.unit().into(),
            residual_px,
        }
    }
}

pub fn scale(k: &Intrinsics, pose: &CameraPose, d: &ScaleDoc) -> AppResult<MeasurementDoc> {
    let m = virtual_scale(k, pose, pixel(d.from), pixel(d.to))?;
    Ok(MeasurementDoc::new(SensorKind::Scale, m, None))
}

pub fn height(k: &Intrinsics, pose: &CameraPose, d: &HeightDoc) -> AppResult<MeasurementDoc> {
    let fit = clinometer_fit(k, pose, pixel(d.base), pixel(d.top))?;
    Ok(MeasurementDoc::new(SensorKind::Height, fit.height_m, Some(fit.residual_px)))
}

pub fn speed(k: &Intrinsics, pose: &CameraPose, d: &SpeedDoc) -> AppResult<MeasurementDoc> {
    let samples = d.track.iter().map(|s| (pixel(s.pixel), s.frame)).collect();
    let track = PixelTrack::new(samples, d.fps).map_err(|e| AppError::Invariant {
        name: format!("track: {e}"),
    })?;
    let v = virtual_radar(k, pose, &track)?;
    Ok(MeasurementDoc::new(SensorKind::Speed, v, None))
}

/// Parses a points document of the given kind and measures it.
pub fn measure(kind: SensorKind, k: &Intrinsics, pose: &CameraPose, points: &[u8]) -> AppResult<MeasurementDoc> {
    match kind {
        SensorKind::Scale => scale(k, pose, &parse_doc(points)?),
        SensorKind::Height => height(k, pose, &parse_doc(points)?),
        SensorKind::Speed => speed(k, pose, &parse_doc(points)?),
    }
}
