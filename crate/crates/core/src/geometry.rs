//! Pinhole camera model, 3D point sets, and rigid-transform algebra.
//!
//! Conventions used throughout the crate:
//! - Pixels are addressed as `(u, v)` = (column, row) with the origin at the
//!   top-left of the image.
//! - The camera frame has +x right, +y down, +z along the optical axis, so a
//!   depth value is the camera-frame z coordinate.
//! - All lengths are meters and all angles radians; conversion to centimeters
//!   and degrees happens only at the reporting boundary.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use thiserror::Error;

use crate::grid::Grid;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Pinhole intrinsics. `fx, fy` are focal lengths in pixels, `(cx, cy)` the
/// principal point, `width × height` the image size.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if !(0.0 <= cx && cx < width as f64 && 0.0 <= cy && cy < height as f64) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Lift pixel `(u, v)` with depth `d` to a camera-frame point.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        )
    }

    /// Project a camera-frame point to continuous pixel coordinates.
    /// Returns `None` for points at or behind the camera plane.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Side length, in meters, of one pixel's footprint at range `depth`.
    /// This is the resolution floor of anything recovered from a rendering.
    #[inline]
    pub fn pixel_size_at(&self, depth: f64) -> f64 {
        depth / self.fx.min(self.fy)
    }
}

/// Frame a point set is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Camera,
    World,
    Object,
}

/// Ordered list of 3D points tagged with the frame they live in.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub frame: Frame,
    points: Vec<Vector3<f64>>,
}

impl PointSet {
    pub fn new(frame: Frame, points: Vec<Vector3<f64>>) -> Self {
        debug_assert!(points.iter().all(|p| p.x.is_finite() && p.y.is_finite() && p.z.is_finite()));
        Self { frame, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        Some(self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64)
    }
}

/// Unproject every selected pixel of a depth image into a camera-frame point
/// set. Pixels are visited in row-major order; a pixel contributes iff the
/// mask selects it and its depth is positive.
pub fn unproject(
    depth: &Grid<f64>,
    mask: impl Fn(usize, usize) -> bool,
    intr: &CameraIntrinsics,
) -> PointSet {
    let mut points = Vec::new();
    for (u, v, d) in depth.iter() {
        if d > 0.0 && mask(u, v) {
            points.push(intr.unproject(u as f64, v as f64, d));
        }
    }
    PointSet::new(Frame::Camera, points)
}

const ORTHONORMALITY_TOL: f64 = 1e-9;

/// SE(3) rigid transform: `p ↦ R·p + t` with `R` a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_axis_angle(axis: &Unit<Vector3<f64>>, angle: f64) -> Self {
        Self {
            rotation: *Rotation3::from_axis_angle(axis, angle).matrix(),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation by `yaw` about the world z axis.
    pub fn rotation_z(yaw: f64) -> Self {
        Self::from_axis_angle(&Vector3::z_axis(), yaw)
    }

    /// Planar pose: translation `(x, y, 0)` after a yaw about z.
    pub fn planar(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            rotation: *Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).matrix(),
            translation: Vector3::new(x, y, 0.0),
        }
    }

    #[inline]
    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Map every point; order is preserved and the frame tag carried over.
    pub fn apply(&self, set: &PointSet) -> PointSet {
        PointSet::new(
            set.frame,
            set.points().iter().map(|p| self.apply_point(p)).collect(),
        )
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let composed = Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        };
        if composed.orthonormality_drift() > ORTHONORMALITY_TOL {
            composed.orthonormalized()
        } else {
            composed
        }
    }

    pub fn invert(&self) -> Self {
        let rot_inv = self.rotation.transpose();
        Self {
            rotation: rot_inv,
            translation: -(rot_inv * self.translation),
        }
    }

    /// Geodesic rotation angle `arccos((trace(R) − 1) / 2)`, clamped to [0, π].
    pub fn rotation_angle(&self) -> f64 {
        let c = (self.rotation.trace() - 1.0) / 2.0;
        c.clamp(-1.0, 1.0).acos()
    }

    /// Geodesic distance between the two rotations, via
    /// `‖R₁ − R₂‖_F = 2√2·sin(θ/2)`. Unlike composing with the inverse and
    /// taking `rotation_angle`, this stays accurate near zero, where arccos
    /// amplifies float dust to ~1e-8.
    pub fn rotation_distance_to(&self, other: &Self) -> f64 {
        let s = ((self.rotation - other.rotation).norm() / (2.0 * std::f64::consts::SQRT_2))
            .clamp(-1.0, 1.0);
        2.0 * s.asin()
    }

    /// Angle between the transform's image of +z and +z itself: zero for any
    /// rotation purely about the z axis.
    pub fn tilt_angle(&self) -> f64 {
        self.rotation.m33.clamp(-1.0, 1.0).acos()
    }

    /// Yaw of the closest rotation about +z (maximizes `trace(Rz(θ)ᵀ R)`).
    pub fn yaw_projection(&self) -> f64 {
        (self.rotation.m21 - self.rotation.m12).atan2(self.rotation.m11 + self.rotation.m22)
    }

    /// Max-norm deviation of `RᵀR` from the identity.
    pub fn orthonormality_drift(&self) -> f64 {
        let d = self.rotation.transpose() * self.rotation - Matrix3::identity();
        d.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Nearest proper rotation by polar decomposition (SVD with the
    /// determinant sign folded into the smallest singular direction).
    pub fn orthonormalized(&self) -> Self {
        let svd = self.rotation.svd(true, true);
        let u = svd.u.expect("3x3 SVD produces U");
        let v_t = svd.v_t.expect("3x3 SVD produces Vᵀ");
        let mut rotation = u * v_t;
        if rotation.determinant() < 0.0 {
            let mut d = Matrix3::identity();
            d.m33 = -1.0;
            rotation = u * d * v_t;
        }
        Self {
            rotation,
            translation: self.translation,
        }
    }
}
