//! Ground-plane inversion and the measurements it enables: ground length,
//! building height and vehicle speed.

use alloc::vec::Vec;

use nalgebra::{Matrix2, Vector2};

use crate::geometry::{project_to_pixel, Axis, CameraPose, Intrinsics, PixelPoint, WorldPoint};
use crate::stats::median;
use crate::{tol, Error, Result};

/// Largest tolerated reprojection residual of a clinometer top point.
pub const MAX_VERTICAL_RESIDUAL_PX: f64 = 5.0;

/// Meters per second to kilometers per hour.
pub const MPS_TO_KMH: f64 = 3.6;

/// The world point on `z = 0` seen at pixel `p`.
pub fn pixel_to_ground(k: &Intrinsics, pose: &CameraPose, p: PixelPoint) -> Result<WorldPoint> {
    let ray = k.unproject(p);
    let n = pose.rotation.column(Axis::Z);
    let t = pose.translation.to_vector();
    let denom = n.dot(&ray);
    if (denom / ray.norm()).abs() < tol::GEOMETRIC {
        return Err(Error::HorizonRay);
    }
    let lambda = n.dot(&t) / denom;
    if !(lambda > 0.0) {
        return Err(Error::BehindCamera { depth: lambda });
    }
    let w = pose.rotation.matrix().transpose() * (ray * lambda - t);
    Ok(WorldPoint::new(w.x, w.y, 0.0))
}

/// Ground distance between the points seen at `p1` and `p2`.
pub fn virtual_scale(k: &Intrinsics, pose: &CameraPose, p1: PixelPoint, p2: PixelPoint) -> Result<f64> {
    let a = pixel_to_ground(k, pose, p1)?;
    let b = pixel_to_ground(k, pose, p2)?;
    Ok(a.distance(b))
}

/// Height above the ground of the point seen at `top`, assumed vertically
/// above the ground point seen at `base`.
pub fn virtual_clinometer(k: &Intrinsics, pose: &CameraPose, base: PixelPoint, top: PixelPoint) -> Result<f64> {
    Ok(clinometer_fit(k, pose, base, top)?.height_m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClinometerFit {
    pub base: WorldPoint,
    pub height_m: f64,
    /// Pixel distance between `top` and the reprojected fitted point.
    pub residual_px: f64,
}

pub fn clinometer_fit(k: &Intrinsics, pose: &CameraPose, base: PixelPoint, top: PixelPoint) -> Result<ClinometerFit> {
    let b = pixel_to_ground(k, pose, base)?;
    if top == base {
        return Ok(ClinometerFit {
            base: b,
            height_m: 0.0,
            residual_px: 0.0,
        });
    }
    // λ·ray − z·r₃ = R·(x, y, 0) + T, least squares in (λ, z)
    let ray = k.unproject(top);
    let r3 = pose.rotation.column(Axis::Z);
    let rhs = pose.world_to_camera(b).to_vector();
    let ata = Matrix2::new(ray.dot(&ray), -ray.dot(&r3), -ray.dot(&r3), r3.dot(&r3));
    let atb = Vector2::new(ray.dot(&rhs), -r3.dot(&rhs));
    let sol = ata.try_inverse().ok_or(Error::HorizonRay)? * atb;
    let z = sol.y;
    let fitted = WorldPoint::new(b.x, b.y, z);
    let reproj = project_to_pixel(k, pose, fitted)?;
    let residual_px = reproj.pixel.distance(top);
    if residual_px > MAX_VERTICAL_RESIDUAL_PX {
        return Err(Error::VerticalInconsistent { residual_px });
    }
    Ok(ClinometerFit {
        base: b,
        height_m: z,
        residual_px,
    })
}

/// A tracked image feature; frame indices strictly increase.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelTrack {
    samples: Vec<(PixelPoint, u64)>,
    fps: f64,
}

impl PixelTrack {
    pub fn new(samples: Vec<(PixelPoint, u64)>, fps: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooShort);
        }
        if !(fps > 0.0) || !fps.is_finite() {
            return Err(Error::InvalidTrack("fps must be positive"));
        }
        if samples.windows(2).any(|w| w[1].1 <= w[0].1) {
            return Err(Error::InvalidTrack("frame indices must strictly increase"));
        }
        Ok(Self { samples, fps })
    }

    pub fn samples(&self) -> &[(PixelPoint, u64)] {
        &self.samples
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }
}

/// `δ·fps·3.6 / frame_gap` in km/h.
pub fn speed_kmh(delta_m: f64, fps: f64, frame_gap: u64) -> f64 {
    delta_m * fps * MPS_TO_KMH / frame_gap as f64
}

/// Median of the per-pair ground speeds along the track, km/h.
pub fn virtual_radar(k: &Intrinsics, pose: &CameraPose, track: &PixelTrack) -> Result<f64> {
    let ground = track
        .samples
        .iter()
        .map(|&(p, f)| Ok((pixel_to_ground(k, pose, p)?, f)))
        .collect::<Result<Vec<_>>>()?;
    let speeds: Vec<f64> = ground
        .windows(2)
        .map(|w| speed_kmh(w[0].0.distance(w[1].0), track.fps, w[1].1 - w[0].1))
        .collect();
    median(&speeds).map_err(|_| Error::TooShort)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;
    use nalgebra::Vector3;

    fn scene() -> (Intrinsics, CameraPose) {
        let k = Intrinsics::new(1000.0, 1000.0, 640.0, 360.0).unwrap();
        // camera 6 m up, pitched 20° down, looking along world +y
        let tilt = Rotation::from_axis_angle(Vector3::x(), (90.0f64 + 20.0).to_radians());
        let pose = CameraPose::from_position(tilt, WorldPoint::new(0.0, -15.0, 6.0));
        (k, pose)
    }

    #[test]
    fn formula_is_exact() {
        assert_eq!(speed_kmh(0.5, 30.0, 1), 54.0);
        assert_eq!(speed_kmh(0.0, 30.0, 1), 0.0);
    }

    #[test]
    fn ground_round_trip() {
        let (k, pose) = scene();
        for p in [WorldPoint::new(0.0, 0.0, 0.0), WorldPoint::new(3.5, 12.0, 0.0), WorldPoint::new(-8.0, 30.0, 0.0)] {
            let px = project_to_pixel(&k, &pose, p).unwrap().pixel;
            let q = pixel_to_ground(&k, &pose, px).unwrap();
            assert!(q.distance(p) < 1e-9, "{q:?} vs {p:?}");
        }
    }

    #[test]
    fn horizon_pixel() {
        let (k, pose) = scene();
        // the horizon is the image of world directions with zero z component
        let d = pose.rotation.matrix() * Vector3::new(0.3, 1.0, 0.0);
        let h = k.project_direction(&d).unwrap();
        assert_eq!(pixel_to_ground(&k, &pose, h), Err(Error::HorizonRay));
    }

    #[test]
    fn sky_pixel_is_behind() {
        let (k, pose) = scene();
        let d = pose.rotation.matrix() * Vector3::new(0.0, 1.0, 0.5);
        let p = k.project_direction(&d).unwrap();
        assert!(matches!(pixel_to_ground(&k, &pose, p), Err(Error::BehindCamera { .. })));
    }

    #[test]
    fn clinometer_oracle() {
        let (k, pose) = scene();
        let b = WorldPoint::new(4.0, 25.0, 0.0);
        let t = WorldPoint::new(4.0, 25.0, 20.0);
        let bp = project_to_pixel(&k, &pose, b).unwrap().pixel;
        let tp = project_to_pixel(&k, &pose, t).unwrap().pixel;
        assert!((virtual_clinometer(&k, &pose, bp, tp).unwrap() - 20.0).abs() < 1e-6);
        assert_eq!(virtual_clinometer(&k, &pose, bp, bp).unwrap(), 0.0);
    }

    #[test]
    fn clinometer_rejects_off_vertical() {
        let (k, pose) = scene();
        let b = WorldPoint::new(4.0, 25.0, 0.0);
        let bp = project_to_pixel(&k, &pose, b).unwrap().pixel;
        let tp = project_to_pixel(&k, &pose, WorldPoint::new(9.0, 25.0, 10.0)).unwrap().pixel;
        assert!(matches!(
            virtual_clinometer(&k, &pose, bp, tp),
            Err(Error::VerticalInconsistent { .. })
        ));
    }

    #[test]
    fn scale_oracle() {
        let (k, pose) = scene();
        let a = project_to_pixel(&k, &pose, WorldPoint::new(-2.0, 10.0, 0.0)).unwrap().pixel;
        let b = project_to_pixel(&k, &pose, WorldPoint::new(-2.0, 20.0, 0.0)).unwrap().pixel;
        assert!((virtual_scale(&k, &pose, a, b).unwrap() - 10.0).abs() < 1e-6);
        assert_eq!(virtual_scale(&k, &pose, a, a).unwrap(), 0.0);
    }

    #[test]
    fn radar_stationary_and_constant() {
        let (k, pose) = scene();
        let p = project_to_pixel(&k, &pose, WorldPoint::new(0.0, 12.0, 0.0)).unwrap().pixel;
        let t = PixelTrack::new(alloc::vec![(p, 0), (p, 1), (p, 2)], 30.0).unwrap();
        assert_eq!(virtual_radar(&k, &pose, &t).unwrap(), 0.0);

        let samples = (0..10u64)
            .map(|i| {
                let w = WorldPoint::new(0.0, 10.0 + 0.5 * i as f64, 0.0);
                (project_to_pixel(&k, &pose, w).unwrap().pixel, i)
            })
            .collect();
        let t = PixelTrack::new(samples, 30.0).unwrap();
        assert!((virtual_radar(&k, &pose, &t).unwrap() - 54.0).abs() < 1e-6);
    }

    #[test]
    fn track_validation() {
        let p = PixelPoint::new(1.0, 1.0);
        assert_eq!(PixelTrack::new(alloc::vec![(p, 0)], 30.0), Err(Error::TooShort));
        assert!(PixelTrack::new(alloc::vec![(p, 1), (p, 1)], 30.0).is_err());
        assert!(PixelTrack::new(alloc::vec![(p, 1), (p, 2)], 0.0).is_err());
    }

    #[test]
    fn camera_axis_ground_point() {
        let (k, pose) = scene();
        let c = crate::geometry::camera_position_world(&pose);
        let g = pixel_to_ground(&k, &pose, PixelPoint::new(k.cx, k.cy)).unwrap();
        // optical axis pitched 20° down from 6 m
        let expected = 6.0 / 20.0f64.to_radians().tan();
        assert!(((g.y - c.y) - expected).abs() < 1e-9);
    }
}
