//! Finger forward kinematics, roller–object contact geometry, and the
//! per-contact motion split into a base-joint part and a rolling part.
//!
//! Frame chain for finger `i` (all vectors in the grasper frame, `Z0 = +z`):
//!
//! * the base joint sits on a horizontal circle at azimuth `φ_i`, with its
//!   axis `Z1` tangent to the circle;
//! * at `θ1 = 0` the finger points along `Z0`; positive `θ1` tilts it
//!   outwards, away from the grasp axis;
//! * the roller centre sits `a + b` along the finger;
//! * the pivot axis `Z2 = finger × Z1` passes through the roller centre and
//!   points inwards, towards the grasped object;
//! * the roller spin axis `Z3` lies along the finger at `θ2 = 0` and is
//!   rotated by `θ2` about `Z2`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{GrasperConfig, ObjectModel, NUM_FINGERS};
use crate::geometry::{Pose, Vec3};

/// Gap (mm) up to which a roller counts as touching the object.
pub const CONTACT_TOLERANCE_MM: f64 = 1.0;

/// Cross-product norms below this mark a decomposition as degenerate.
pub const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("finger index {0} out of range")]
    FingerIndex(usize),
    #[error("roller not in contact: gap {gap_mm:.3} mm")]
    NoContact { gap_mm: f64 },
    #[error("object centre coincides with roller centre")]
    Degenerate,
    #[error("pivot axis parallel to the rolling direction")]
    DegenerateRollDirection,
    #[error("contact at the roller pole; rolling gives no tangential motion")]
    PoleContact,
    #[error("contact point on the base joint axis")]
    ZeroMomentArm,
    #[error("closing sweep found no contact")]
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerFrames {
    pub base_origin: Vec3,
    /// Z1.
    pub base_axis: Vec3,
    /// Z2.
    pub pivot_axis: Vec3,
    pub roller_center: Vec3,
    /// Z3.
    pub roller_axis: Vec3,
    /// Z0.
    pub vertical: Vec3,
    /// Unit vector from the base joint to the roller centre; `Z3` at `θ2 = 0`.
    pub finger_axis: Vec3,
}

pub fn forward_finger(
    config: &GrasperConfig,
    finger: usize,
    theta1: f64,
    theta2: f64,
) -> Result<FingerFrames, KinematicsError> {
    if finger >= NUM_FINGERS {
        return Err(KinematicsError::FingerIndex(finger));
    }
    let phi = config.finger_azimuths_rad[finger];
    let (s, c) = phi.sin_cos();
    let radial = Vec3::new(c, s, 0.0);
    let z1 = Vec3::new(-s, c, 0.0);
    let z0 = Vec3::Z;
    let base_origin = radial * config.base_circle_radius_mm;
    let finger_axis = z0.rotated_about(z1, theta1);
    let roller_center = base_origin + finger_axis * config.finger_length();
    let z2 = finger_axis.cross(z1);
    let z3 = finger_axis.rotated_about(z2, theta2);
    Ok(FingerFrames {
        base_origin,
        base_axis: z1,
        pivot_axis: z2,
        roller_center,
        roller_axis: z3,
        vertical: z0,
        finger_axis,
    })
}

/// Contact point on the roller and unit normal pointing from the roller
/// towards the object, with the surface gap (negative when penetrating).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    pub point: Vec3,
    pub normal: Vec3,
    pub gap_mm: f64,
}

/// Spherical-object contact from the centre line alone. No gap check; the
/// controller uses this with measured, possibly noisy, object positions.
pub fn sphere_contact(
    frames: &FingerFrames,
    roller_radius: f64,
    object_radius: f64,
    x_obj: Vec3,
) -> Result<ContactState, KinematicsError> {
    let d = x_obj - frames.roller_center;
    let dist = d.norm();
    let normal = d.try_normalize(1e-12).ok_or(KinematicsError::Degenerate)?;
    Ok(ContactState {
        point: frames.roller_center + normal * roller_radius,
        normal,
        gap_mm: dist - object_radius - roller_radius,
    })
}

/// Exact contact geometry for any object model at `pose`, without a gap check.
pub fn contact_geometry(
    frames: &FingerFrames,
    roller_radius: f64,
    obj: &ObjectModel,
    pose: &Pose,
) -> Result<ContactState, KinematicsError> {
    if let crate::config::Shape::Sphere { radius_mm } = obj.shape {
        return sphere_contact(frames, roller_radius, radius_mm, pose.position);
    }
    let q = pose.orientation;
    let local = q.conjugate().rotate(frames.roller_center - pose.position);
    let (closest_local, signed) = obj.closest_point_local(local);
    let closest = pose.position + q.rotate(closest_local);
    let towards = closest - frames.roller_center;
    let normal = if signed >= 0.0 { towards } else { -towards };
    let normal = normal
        .try_normalize(1e-12)
        .or_else(|| (pose.position - frames.roller_center).try_normalize(1e-12))
        .ok_or(KinematicsError::Degenerate)?;
    Ok(ContactState {
        point: frames.roller_center + normal * roller_radius,
        normal,
        gap_mm: signed - roller_radius,
    })
}

/// Contact with the tolerance band applied: gaps beyond
/// [`CONTACT_TOLERANCE_MM`] are reported as `NoContact`.
pub fn contact_state(
    frames: &FingerFrames,
    roller_radius: f64,
    obj: &ObjectModel,
    pose: &Pose,
) -> Result<ContactState, KinematicsError> {
    let c = contact_geometry(frames, roller_radius, obj, pose)?;
    if c.gap_mm > CONTACT_TOLERANCE_MM {
        return Err(KinematicsError::NoContact { gap_mm: c.gap_mm });
    }
    Ok(c)
}

/// Velocity of the object's material point at `p` under the twist `(v, ω)`.
pub fn contact_velocity_from_twist(v_obj: Vec3, omega_obj: Vec3, p: Vec3, x_obj: Vec3) -> Vec3 {
    v_obj + omega_obj.cross(p - x_obj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactDecomposition {
    pub delta_x_cb: Vec3,
    pub delta_x_cr: Vec3,
    pub alpha: f64,
    pub beta: f64,
    pub z_cr_hat: Vec3,
    pub degenerate: bool,
}

/// Splits a contact displacement into `α·ẑ_cb + β·ẑ_cr`, where `ẑ_cr` is the
/// in-plane rolling direction tangent to the contact.
///
/// When the construction collapses (displacement parallel to `ẑ_cb`, or zero)
/// the whole motion is projected onto `ẑ_cb` and `degenerate` is set.
pub fn decompose_contact_motion(
    delta_x_contact: Vec3,
    z_cb_hat: Vec3,
    n_con_hat: Vec3,
) -> ContactDecomposition {
    let plane_normal = z_cb_hat.cross(delta_x_contact);
    let roll = plane_normal.cross(n_con_hat);
    let pair = (plane_normal.norm() >= DEGENERATE_EPS && roll.norm() >= DEGENERATE_EPS)
        .then(|| roll / roll.norm())
        .and_then(|z_cr| {
            let nz = z_cr.cross(z_cb_hat);
            (nz.norm() >= DEGENERATE_EPS).then(|| (z_cr, nz / nz.norm()))
        });

    let Some((z_cr, n_z)) = pair else {
        let alpha = delta_x_contact.dot(z_cb_hat);
        return ContactDecomposition {
            delta_x_cb: z_cb_hat * alpha,
            delta_x_cr: Vec3::ZERO,
            alpha,
            beta: 0.0,
            z_cr_hat: tangent_fallback(z_cb_hat, n_con_hat),
            degenerate: true,
        };
    };

    let alpha = n_z.dot(z_cr.cross(delta_x_contact)) / n_z.dot(z_cr.cross(z_cb_hat));
    let beta = n_z.dot(z_cb_hat.cross(delta_x_contact)) / n_z.dot(z_cb_hat.cross(z_cr));
    ContactDecomposition {
        delta_x_cb: z_cb_hat * alpha,
        delta_x_cr: z_cr * beta,
        alpha,
        beta,
        z_cr_hat: z_cr,
        degenerate: false,
    }
}

// Some unit vector tangent to the contact, for the degenerate branch.
fn tangent_fallback(z_cb: Vec3, n: Vec3) -> Vec3 {
    (z_cb - n * z_cb.dot(n))
        .try_normalize(1e-9)
        .or_else(|| Vec3::X.cross(n).try_normalize(1e-6))
        .or_else(|| Vec3::Y.cross(n).try_normalize(1e-6))
        .unwrap_or(Vec3::X)
}

/// Roller spin axis that makes the rolling direction follow `z_cr_hat`,
/// with the sign chosen so that `Z3 · Z0 >= 0`.
pub fn aligned_roller_axis(z2: Vec3, z_cr_hat: Vec3, z0: Vec3) -> Result<Vec3, KinematicsError> {
    let z3 = z2
        .cross(z_cr_hat)
        .try_normalize(DEGENERATE_EPS)
        .ok_or(KinematicsError::DegenerateRollDirection)?;
    Ok(if z3.dot(z0) < 0.0 { -z3 } else { z3 })
}

/// Pivot angle that aligns the rolling direction with `z_cr_hat`.
///
/// `zero_axis` is the roller axis at zero pivot angle. The magnitude is
/// `arccos(zero_axis · Z3)`; the sign is the sense of rotation about `z2`
/// carrying `zero_axis` onto `Z3`. The result is clamped to `[-π/2, π/2]`.
pub fn pivot_angle_for(
    zero_axis: Vec3,
    z2: Vec3,
    z_cr_hat: Vec3,
    z0: Vec3,
) -> Result<f64, KinematicsError> {
    let z3 = aligned_roller_axis(z2, z_cr_hat, z0)?;
    let magnitude = zero_axis.dot(z3).clamp(-1.0, 1.0).acos();
    let sign = if zero_axis.cross(z3).dot(z2) < 0.0 { -1.0 } else { 1.0 };
    Ok((sign * magnitude).clamp(-FRAC_PI_2, FRAC_PI_2))
}

/// Roller increment whose surface motion at the contact covers `delta_x_cr`.
pub fn roller_rate_for(
    delta_x_cr: Vec3,
    z3: Vec3,
    n_con_hat: Vec3,
    r: f64,
) -> Result<f64, KinematicsError> {
    let surface_dir = z3.cross(n_con_hat);
    let arm = surface_dir.norm();
    if arm <= 1e-6 {
        return Err(KinematicsError::PoleContact);
    }
    let mag = delta_x_cr.norm();
    if mag == 0.0 {
        return Ok(0.0);
    }
    let sign = if surface_dir.dot(delta_x_cr) < 0.0 { -1.0 } else { 1.0 };
    Ok(sign * mag / (r * arm))
}

/// Base joint increment whose motion at `p` covers `delta_x_cb`.
pub fn base_rate_for(
    delta_x_cb: Vec3,
    frames: &FingerFrames,
    p: Vec3,
) -> Result<f64, KinematicsError> {
    let lever = frames.base_axis.cross(p - frames.base_origin);
    let arm = lever.norm();
    if arm <= 1e-6 {
        return Err(KinematicsError::ZeroMomentArm);
    }
    let mag = delta_x_cb.norm();
    if mag == 0.0 {
        return Ok(0.0);
    }
    let sign = if lever.dot(delta_x_cb) < 0.0 { -1.0 } else { 1.0 };
    Ok(sign * mag / arm)
}

/// Surface gap between finger `finger`'s roller and `obj`, as a function
/// of the base angle only (the pivot does not move the roller centre).
pub fn roller_gap(
    config: &GrasperConfig,
    finger: usize,
    theta1: f64,
    obj: &ObjectModel,
    pose: &Pose,
) -> Result<f64, KinematicsError> {
    let frames = forward_finger(config, finger, theta1, 0.0)?;
    Ok(contact_geometry(&frames, config.roller_radius_mm, obj, pose)?.gap_mm)
}

/// Most open angle of the closing sweep.
pub const SWEEP_OPEN_RAD: f64 = 60.0 * std::f64::consts::PI / 180.0;
const SWEEP_STEP_RAD: f64 = 0.25 * std::f64::consts::PI / 180.0;

/// Base angle at which the roller first touches the object when the finger
/// closes from fully open; found by a coarse inward sweep and bisection.
pub fn zero_gap_base_angle(
    config: &GrasperConfig,
    finger: usize,
    obj: &ObjectModel,
    pose: &Pose,
) -> Result<f64, KinematicsError> {
    let gap = |t: f64| roller_gap(config, finger, t, obj, pose);
    let mut hi = SWEEP_OPEN_RAD;
    if gap(hi)? <= 0.0 {
        return Err(KinematicsError::Unreachable);
    }
    while hi > -SWEEP_OPEN_RAD {
        let lo = hi - SWEEP_STEP_RAD;
        let g_lo = gap(lo)?;
        if g_lo <= 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if gap(m)? <= 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok(a);
        }
        hi = lo;
    }
    Err(KinematicsError::Unreachable)
}

/// Zero-gap base angle searched outwards from `guess`: steps inwards while
/// the roller is clear of the object, outwards while it penetrates, then
/// bisects the bracket. Returns the angle on the touching side.
pub fn zero_gap_base_angle_near(
    config: &GrasperConfig,
    finger: usize,
    obj: &ObjectModel,
    pose: &Pose,
    guess: f64,
) -> Result<f64, KinematicsError> {
    const STEP: f64 = 0.5 * std::f64::consts::PI / 180.0;
    let gap = |t: f64| roller_gap(config, finger, t, obj, pose);
    let start = guess.clamp(-SWEEP_OPEN_RAD, SWEEP_OPEN_RAD);
    let (mut touching, mut clear) = if gap(start)? <= 0.0 {
        let mut t = start;
        loop {
            let next = t + STEP;
            if next > SWEEP_OPEN_RAD {
                return Err(KinematicsError::Unreachable);
            }
            if gap(next)? > 0.0 {
                break (t, next);
            }
            t = next;
        }
    } else {
        let mut t = start;
        loop {
            let next = t - STEP;
            if next < -SWEEP_OPEN_RAD {
                return Err(KinematicsError::Unreachable);
            }
            if gap(next)? <= 0.0 {
                break (next, t);
            }
            t = next;
        }
    };
    for _ in 0..50 {
        let m = 0.5 * (touching + clear);
        if gap(m)? <= 0.0 {
            touching = m;
        } else {
            clear = m;
        }
    }
    Ok(touching)
}
