//! Grasper parameters, object models and the nine-joint vector.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

pub const NUM_FINGERS: usize = 3;
pub const NUM_JOINTS: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, reason: reason.into() }
}

fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a finite value > 0, got {v}")))
    }
}

/// Nine joint values ordered finger A (base, pivot, roller), then B, then C.
///
/// Base and pivot are angles in rad; roller is the accumulated spin angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct JointVector([f64; NUM_JOINTS]);

impl JointVector {
    pub const ZERO: JointVector = JointVector([0.0; NUM_JOINTS]);

    /// Rejects non-finite entries and pivots outside `[-π/2, π/2]`.
    pub fn new(values: [f64; NUM_JOINTS]) -> Result<Self, ConfigError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("joints", "non-finite joint value"));
        }
        for f in 0..NUM_FINGERS {
            let p = values[3 * f + 1];
            if p.abs() > FRAC_PI_2 {
                return Err(invalid("joints", format!("pivot {f} = {p} outside [-pi/2, pi/2]")));
            }
        }
        Ok(Self(values))
    }

    /// Clamps pivots into range and replaces non-finite entries by zero.
    pub fn clamped(values: [f64; NUM_JOINTS]) -> Self {
        let mut v = values.map(|x| if x.is_finite() { x } else { 0.0 });
        for f in 0..NUM_FINGERS {
            v[3 * f + 1] = v[3 * f + 1].clamp(-FRAC_PI_2, FRAC_PI_2);
        }
        Self(v)
    }

    pub fn as_array(&self) -> &[f64; NUM_JOINTS] {
        &self.0
    }

    pub fn base(&self, finger: usize) -> f64 {
        self.0[3 * finger]
    }

    pub fn pivot(&self, finger: usize) -> f64 {
        self.0[3 * finger + 1]
    }

    pub fn roller(&self, finger: usize) -> f64 {
        self.0[3 * finger + 2]
    }

    pub fn set_base(&mut self, finger: usize, v: f64) {
        self.0[3 * finger] = v;
    }

    pub fn set_pivot(&mut self, finger: usize, v: f64) {
        self.0[3 * finger + 1] = v.clamp(-FRAC_PI_2, FRAC_PI_2);
    }

    pub fn set_roller(&mut self, finger: usize, v: f64) {
        self.0[3 * finger + 2] = v;
    }
}

impl TryFrom<[f64; NUM_JOINTS]> for JointVector {
    type Error = ConfigError;
    fn try_from(v: [f64; NUM_JOINTS]) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<JointVector> for [f64; NUM_JOINTS] {
    fn from(j: JointVector) -> Self {
        j.0
    }
}

/// Physical and control parameters of the grasper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrasperConfig {
    /// Base joint to pivot.
    pub link_a_mm: f64,
    /// Pivot to roller centre.
    pub link_b_mm: f64,
    pub roller_radius_mm: f64,
    pub base_circle_radius_mm: f64,
    pub finger_azimuths_rad: [f64; NUM_FINGERS],
    pub pivot_limit_rad: f64,
    pub pivot_rate_limit_rad: f64,
    pub base_rate_limit_rad: f64,
    pub roller_rate_limit_rad: f64,
    /// Fraction of the remaining pose error commanded per step.
    pub lambda: f64,
    /// Weight on the translational part of the commanded twist.
    pub w_pos: f64,
    /// Extra closing angle beyond zero gap applied to the base setpoint.
    pub grip_preload_rad: f64,
    /// Radius the controller assumes for every object.
    pub controller_object_radius_mm: f64,
    pub leaky_slope: f64,
}

impl Default for GrasperConfig {
    fn default() -> Self {
        Self {
            link_a_mm: 48.0,
            link_b_mm: 122.0,
            roller_radius_mm: 21.5,
            base_circle_radius_mm: 50.0,
            finger_azimuths_rad: [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0],
            pivot_limit_rad: FRAC_PI_2,
            pivot_rate_limit_rad: 3f64.to_radians(),
            base_rate_limit_rad: 2f64.to_radians(),
            roller_rate_limit_rad: 0.2,
            lambda: 0.05,
            w_pos: 1.0,
            grip_preload_rad: 0.5f64.to_radians(),
            controller_object_radius_mm: 30.0,
            leaky_slope: 0.01,
        }
    }
}

impl GrasperConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("link_a_mm", self.link_a_mm)?;
        positive("link_b_mm", self.link_b_mm)?;
        positive("roller_radius_mm", self.roller_radius_mm)?;
        positive("base_circle_radius_mm", self.base_circle_radius_mm)?;
        positive("pivot_rate_limit_rad", self.pivot_rate_limit_rad)?;
        positive("base_rate_limit_rad", self.base_rate_limit_rad)?;
        positive("roller_rate_limit_rad", self.roller_rate_limit_rad)?;
        positive("controller_object_radius_mm", self.controller_object_radius_mm)?;
        if self.finger_azimuths_rad.iter().any(|a| !a.is_finite()) {
            return Err(invalid("finger_azimuths_rad", "non-finite azimuth"));
        }
        if !(self.pivot_limit_rad > 0.0 && self.pivot_limit_rad <= FRAC_PI_2) {
            return Err(invalid("pivot_limit_rad", "must lie in (0, pi/2]"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(invalid("lambda", format!("must lie in (0, 1], got {}", self.lambda)));
        }
        if !(self.w_pos.is_finite() && self.w_pos >= 0.0) {
            return Err(invalid("w_pos", "must be finite and >= 0"));
        }
        if !(self.grip_preload_rad.is_finite() && self.grip_preload_rad >= 0.0) {
            return Err(invalid("grip_preload_rad", "must be finite and >= 0"));
        }
        if !(self.leaky_slope.is_finite() && (0.0..1.0).contains(&self.leaky_slope)) {
            return Err(invalid("leaky_slope", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Base joint to roller centre.
    pub fn finger_length(&self) -> f64 {
        self.link_a_mm + self.link_b_mm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Sphere { radius_mm: f64 },
    /// Full edge lengths along the object's local x, y and z axes.
    Box { dx_mm: f64, dy_mm: f64, dz_mm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectModel {
    pub shape: Shape,
    pub mass_g: f64,
}

impl ObjectModel {
    pub fn sphere(radius_mm: f64) -> Self {
        Self { shape: Shape::Sphere { radius_mm }, mass_g: 0.0 }
    }

    /// 6 cm cube, 32.4 g.
    pub fn cube60() -> Self {
        Self { shape: Shape::Box { dx_mm: 60.0, dy_mm: 60.0, dz_mm: 60.0 }, mass_g: 32.4 }
    }

    /// 6 × 6 × 8 cm prism, long axis along local z.
    pub fn prism_6x6x8() -> Self {
        Self { shape: Shape::Box { dx_mm: 60.0, dy_mm: 60.0, dz_mm: 80.0 }, mass_g: 0.0 }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.shape {
            Shape::Sphere { radius_mm } => positive("radius_mm", radius_mm)?,
            Shape::Box { dx_mm, dy_mm, dz_mm } => {
                positive("dx_mm", dx_mm)?;
                positive("dy_mm", dy_mm)?;
                positive("dz_mm", dz_mm)?;
            }
        }
        if !(self.mass_g.is_finite() && self.mass_g >= 0.0) {
            return Err(invalid("mass_g", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.shape, Shape::Sphere { .. })
    }

    /// Closest surface point to `q` (object frame) and the signed distance,
    /// negative inside.
    pub fn closest_point_local(&self, q: Vec3) -> (Vec3, f64) {
        match self.shape {
            Shape::Sphere { radius_mm } => {
                let d = q.norm();
                let dir = q.try_normalize(1e-12).unwrap_or(Vec3::Z);
                (dir * radius_mm, d - radius_mm)
            }
            Shape::Box { dx_mm, dy_mm, dz_mm } => {
                let h = Vec3::new(0.5 * dx_mm, 0.5 * dy_mm, 0.5 * dz_mm);
                let c = Vec3::new(q.x.clamp(-h.x, h.x), q.y.clamp(-h.y, h.y), q.z.clamp(-h.z, h.z));
                if c != q {
                    return (c, (q - c).norm());
                }
                // Inside: push out through the nearest face.
                let gaps = [h.x - q.x.abs(), h.y - q.y.abs(), h.z - q.z.abs()];
                let axis = (0..3).min_by(|&a, &b| gaps[a].total_cmp(&gaps[b])).unwrap_or(0);
                let mut p = q;
                match axis {
                    0 => p.x = h.x.copysign(q.x),
                    1 => p.y = h.y.copysign(q.y),
                    _ => p.z = h.z.copysign(q.z),
                }
                (p, -gaps[axis])
            }
        }
    }
}
