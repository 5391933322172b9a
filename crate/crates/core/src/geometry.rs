//! Vector, quaternion and pose arithmetic shared by every other module.
//!
//! Quaternions are Hamilton, scalar-first `[w, x, y, z]`, in right-handed
//! frames. Lengths are millimetres and angles radians throughout.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on unit-norm invariants.
pub const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite component in {0}")]
    NonFinite(&'static str),
    #[error("zero-length quaternion")]
    ZeroQuaternion,
    #[error("zero rotation axis with nonzero angle {0}")]
    ZeroAxis(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    /// Unit vector in the same direction, or `None` below `eps` length.
    pub fn try_normalize(self, eps: f64) -> Option<Vec3> {
        let n = self.norm();
        (n > eps && n.is_finite()).then(|| self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Rotate `self` about the unit `axis` by `angle` (Rodrigues).
    pub fn rotated_about(self, axis: Vec3, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        self * c + axis.cross(self) * s + axis * (axis.dot(self) * (1.0 - c))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, k: f64) -> Vec3 {
        Vec3::new(self.x / k, self.y / k, self.z / k)
    }
}

/// Unit quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalizes the given components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(GeometryError::NonFinite("quaternion"));
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n < 1e-300 {
            return Err(GeometryError::ZeroQuaternion);
        }
        Ok(Self { w: w / n, x: x / n, y: y / n, z: z / n })
    }

    /// Stores the components as given when they are already unit within
    /// [`UNIT_TOL`], otherwise normalizes. Keeps persisted values bit-exact.
    pub fn from_array(a: [f64; 4]) -> Result<Self, GeometryError> {
        let n2 = a.iter().map(|c| c * c).sum::<f64>();
        if a.iter().all(|c| c.is_finite()) && (n2.sqrt() - 1.0).abs() <= UNIT_TOL {
            Ok(Self { w: a[0], x: a[1], y: a[2], z: a[3] })
        } else {
            Self::new(a[0], a[1], a[2], a[3])
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn w(self) -> f64 {
        self.w
    }

    pub fn vector(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    /// `[cos(θ/2), sin(θ/2)·axis]`. The axis is normalized; a zero axis is
    /// accepted only together with a zero angle.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, GeometryError> {
        if !axis.is_finite() || !angle.is_finite() {
            return Err(GeometryError::NonFinite("angle-axis"));
        }
        if angle == 0.0 {
            return Ok(Self::IDENTITY);
        }
        let axis = axis.try_normalize(1e-12).ok_or(GeometryError::ZeroAxis(angle))?;
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, s * axis.x, s * axis.y, s * axis.z)
    }

    /// Exponential map of a rotation vector (axis times angle).
    pub fn from_rotation_vector(rv: Vec3) -> Self {
        let angle = rv.norm();
        if angle < 1e-300 {
            return Self::IDENTITY;
        }
        Self::from_axis_angle(rv / angle, angle).unwrap_or(Self::IDENTITY)
    }

    pub fn conjugate(self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn negated(self) -> Self {
        Self { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product `self ⊗ o`, renormalized.
    pub fn mul(self, o: UnitQuat) -> UnitQuat {
        let (a, b) = (self, o);
        let w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z;
        let x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y;
        let y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x;
        let z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w;
        let n = (w * w + x * x + y * y + z * z).sqrt();
        UnitQuat { w: w / n, x: x / n, y: y / n, z: z / n }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = self.vector();
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    pub fn dot(self, o: UnitQuat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Canonical angle-axis with the angle in `[0, π]`.
    pub fn to_angle_axis(self) -> AngleAxis {
        let q = if self.w < 0.0 { self.negated() } else { self };
        let v = q.vector();
        let s = v.norm();
        if s < 1e-300 {
            return AngleAxis::IDENTITY;
        }
        let angle = 2.0 * s.atan2(q.w);
        AngleAxis { axis: v / s, angle }
    }
}

impl TryFrom<[f64; 4]> for UnitQuat {
    type Error = GeometryError;
    fn try_from(a: [f64; 4]) -> Result<Self, Self::Error> {
        Self::from_array(a)
    }
}

impl From<UnitQuat> for [f64; 4] {
    fn from(q: UnitQuat) -> Self {
        q.to_array()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleAxis {
    pub axis: Vec3,
    pub angle: f64,
}

impl AngleAxis {
    /// Zero rotation; the axis is arbitrary and fixed to +z.
    pub const IDENTITY: AngleAxis = AngleAxis { axis: Vec3::Z, angle: 0.0 };

    /// Canonicalizes: normalizes the axis and folds the angle into `[0, π]`,
    /// flipping the axis where needed.
    pub fn new(axis: Vec3, angle: f64) -> Result<Self, GeometryError> {
        Ok(UnitQuat::from_axis_angle(axis, angle)?.to_angle_axis())
    }

    pub fn to_quat(self) -> UnitQuat {
        UnitQuat::from_axis_angle(self.axis, self.angle).unwrap_or(UnitQuat::IDENTITY)
    }

    /// `angle · axis`.
    pub fn rotation_vector(self) -> Vec3 {
        self.axis * self.angle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: UnitQuat) -> Self {
        Self { position, orientation }
    }

    pub fn from_position(position: Vec3) -> Self {
        Self::new(position, UnitQuat::IDENTITY)
    }
}

/// Translation and world-frame rotation carrying `current` onto `target`.
pub fn pose_delta(current: &Pose, target: &Pose) -> (Vec3, AngleAxis) {
    let translation = target.position - current.position;
    if current.orientation == target.orientation {
        return (translation, AngleAxis::IDENTITY);
    }
    let rot = target.orientation.mul(current.orientation.conjugate());
    (translation, rot.to_angle_axis())
}
