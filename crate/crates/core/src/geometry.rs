//! Coordinate frames, the pinhole projection and rotation hygiene.

use core::fmt;

use nalgebra::{Matrix3, Vector3};

use crate::{tol, Error, Result};

/// World axes, named after the car dimension they follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    /// Car length.
    X,
    /// Car width.
    Y,
    /// Car height.
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Image position in pixels, `v` growing downward from the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn homogeneous(self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, 1.0)
    }

    pub fn distance(self, other: PixelPoint) -> f64 {
        crate::math::hypot(self.u - other.u, self.v - other.v)
    }

    pub fn is_finite(self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// World-frame position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub const ORIGIN: WorldPoint = WorldPoint::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn distance(self, other: WorldPoint) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }

    /// Distance in the ground (x, y) plane.
    pub fn ground_distance(self, other: WorldPoint) -> f64 {
        crate::math::hypot(self.x - other.x, self.y - other.y)
    }
}

impl core::ops::Sub for WorldPoint {
    type Output = WorldPoint;

    fn sub(self, other: WorldPoint) -> WorldPoint {
        WorldPoint::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }
}

/// Camera-frame position in meters, `z` along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CameraPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CameraPoint {
    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self {
            x: v.x,
            y: v.y,
            z: v.z,
        }
    }
}

/// Zero-skew pinhole intrinsics. `fx = f/dp_x`, `fy = f/dp_y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidIntrinsics("focal lengths must be positive"));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidIntrinsics("image center must be finite"));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// `K⁻¹·[p‖1]`, the normalized image ray with unit third component.
    pub fn unproject(&self, p: PixelPoint) -> Vector3<f64> {
        Vector3::new((p.u - self.cx) / self.fx, (p.v - self.cy) / self.fy, 1.0)
    }

    /// Pixel of a camera-frame direction; `None` when it has no forward component.
    pub fn project_direction(&self, d: &Vector3<f64>) -> Option<PixelPoint> {
        if d.z.abs() < tol::SINGULAR {
            return None;
        }
        Some(PixelPoint::new(
            self.fx * d.x / d.z + self.cx,
            self.fy * d.y / d.z + self.cy,
        ))
    }
}

/// Proper rotation matrix, world to camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Accepts `m` only if it lies in SO(3) within [`tol::SO3`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entry"));
        }
        if (m * m.transpose() - Matrix3::identity()).norm() > tol::SO3 {
            return Err(Error::InvalidRotation("not orthonormal"));
        }
        if (m.determinant() - 1.0).abs() > tol::SO3 {
            return Err(Error::InvalidRotation("determinant is not +1"));
        }
        Ok(Rotation(m))
    }

    /// Rotation by `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let k = axis.normalize();
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
        Rotation(Matrix3::identity() + kx * s + kx * kx * (1.0 - c))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Column `i`: world axis `i` expressed in the camera frame.
    pub fn column(&self, axis: Axis) -> Vector3<f64> {
        self.0.column(axis.index()).into_owned()
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    /// Geodesic (angle-of-relative-rotation) distance in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        let rel = self.0.transpose() * other.0;
        // atan2 of the skew and symmetric parts stays accurate near zero
        let s = Vector3::new(rel[(2, 1)] - rel[(1, 2)], rel[(0, 2)] - rel[(2, 0)], rel[(1, 0)] - rel[(0, 1)]).norm() / 2.0;
        let c = (rel.trace() - 1.0) / 2.0;
        libm::atan2(s, c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Translation {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl Translation {
    pub const fn new(tx: f64, ty: f64, tz: f64) -> Self {
        Self { tx, ty, tz }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.tx, self.ty, self.tz)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Extrinsics `M = [R | T]`: `x_c = R·x_w + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Rotation,
    pub translation: Translation,
}

impl CameraPose {
    pub fn new(rotation: Rotation, translation: Translation) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Pose of a camera at `position` (world frame) with orientation `rotation`.
    pub fn from_position(rotation: Rotation, position: WorldPoint) -> Self {
        let t = -(rotation.matrix() * position.to_vector());
        Self::new(rotation, Translation::from_vector(&t))
    }

    pub fn world_to_camera(&self, p: WorldPoint) -> CameraPoint {
        let v = self.rotation.matrix() * p.to_vector() + self.translation.to_vector();
        CameraPoint::from_vector(&v)
    }

    pub fn camera_to_world(&self, p: CameraPoint) -> WorldPoint {
        let v = self.rotation.matrix().transpose()
            * (p.to_vector() - self.translation.to_vector());
        WorldPoint::from_vector(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionResult {
    pub pixel: PixelPoint,
    /// The homogeneous scale λ in `λ·[x_p‖1] = K·M·[x_w‖1]`.
    pub depth_scale: f64,
}

/// Pixel projection of a world point.
pub fn project_to_pixel(k: &Intrinsics, pose: &CameraPose, p: WorldPoint) -> Result<ProjectionResult> {
    let c = pose.world_to_camera(p);
    if c.z <= tol::GEOMETRIC {
        return Err(Error::BehindCamera { depth: c.z });
    }
    let h = k.matrix() * c.to_vector();
    Ok(ProjectionResult {
        pixel: PixelPoint::new(h.x / h.z, h.y / h.z),
        depth_scale: h.z,
    })
}

/// Camera center in world coordinates, `−Rᵀ·T`.
pub fn camera_position_world(pose: &CameraPose) -> WorldPoint {
    let c = -(pose.rotation.matrix().transpose() * pose.translation.to_vector());
    WorldPoint::from_vector(&c)
}

/// Closest rotation to `m` in the Frobenius sense (`U·Vᵀ` with a det fix).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Result<Rotation> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidRotation("non-finite entry"));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Singular { smallest: 0.0 }),
    };
    let (imin, smallest) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if s < acc.1 { (i, s) } else { acc });
    if smallest < tol::SINGULAR {
        return Err(Error::Singular { smallest });
    }
    let mut u = u;
    if (u * v_t).determinant() < 0.0 {
        let mut col = u.column_mut(imin);
        col.neg_mut();
    }
    Ok(Rotation(u * v_t))
}
