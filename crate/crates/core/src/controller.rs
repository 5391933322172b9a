//! Handcrafted closed-loop rotation controller.
//!
//! Per step and finger: the commanded object twist is mapped to a contact
//! displacement, split into its base and rolling parts, the pivot is steered
//! (rate-limited) so the roller rolls along the rolling part, and the roller
//! is advanced by the matching spin. Base joints are held at a grip setpoint
//! slightly inside first contact rather than following the base part.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{GrasperConfig, JointVector, ObjectModel, NUM_FINGERS};
use crate::geometry::{pose_delta, Pose, Vec3};
use crate::kinematics::{
    contact_velocity_from_twist, decompose_contact_motion, forward_finger, pivot_angle_for,
    roller_rate_for, zero_gap_base_angle_near, ContactDecomposition, ContactState,
    FingerFrames, KinematicsError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("finger {0} is not in contact")]
    NotGrasping(usize),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Start and target pose of one object transformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub start: Pose,
    pub target: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub joint_targets: JointVector,
    pub decompositions: [ContactDecomposition; NUM_FINGERS],
    pub degenerate_flags: [bool; NUM_FINGERS],
}

/// `(λ·Δx, λ·θ·axis)` from the remaining pose error.
pub fn desired_object_velocity(current: &Pose, target: &Pose, lambda: f64) -> (Vec3, Vec3) {
    let (dx, rot) = pose_delta(current, target);
    (dx * lambda, rot.rotation_vector() * lambda)
}

/// Base angle that closes finger `finger` just past first contact with a
/// sphere of the controller's assumed radius centred at `x_obj`.
pub fn grip_setpoint(
    config: &GrasperConfig,
    finger: usize,
    x_obj: Vec3,
    current_base: f64,
) -> Result<f64, KinematicsError> {
    let ball = ObjectModel::sphere(config.controller_object_radius_mm);
    let touch =
        zero_gap_base_angle_near(config, finger, &ball, &Pose::from_position(x_obj), current_base)?;
    Ok(touch - config.grip_preload_rad)
}

/// Nine joint targets for the next step.
///
/// Roller spins are scaled down together when any exceeds the roller rate
/// limit, so the three contacts keep a consistent rolling pattern.
pub fn step_policy(
    config: &GrasperConfig,
    frames: &[FingerFrames; NUM_FINGERS],
    contacts: &[Option<ContactState>; NUM_FINGERS],
    current: &Pose,
    target: &Pose,
    joints: &JointVector,
) -> Result<ControlCommand, ControlError> {
    let contacts: [ContactState; NUM_FINGERS] = {
        let mut out = [ContactState { point: Vec3::ZERO, normal: Vec3::X, gap_mm: 0.0 }; 3];
        for (f, c) in contacts.iter().enumerate() {
            out[f] = c.ok_or(ControlError::NotGrasping(f))?;
        }
        out
    };
    let (v, omega) = desired_object_velocity(current, target, config.lambda);
    let v = v * config.w_pos;
    let x = current.position;

    let mut targets = *joints;
    let mut spins = [0.0; NUM_FINGERS];
    let mut decompositions = [None; NUM_FINGERS];
    for f in 0..NUM_FINGERS {
        let fr = &frames[f];
        let c = &contacts[f];
        let dx = contact_velocity_from_twist(v, omega, c.point, x);
        let dec = decompose_contact_motion(dx, fr.pivot_axis, c.normal);
        decompositions[f] = Some(dec);
        if dec.degenerate {
            continue;
        }
        let aligned = match pivot_angle_for(fr.finger_axis, fr.pivot_axis, dec.z_cr_hat, fr.vertical) {
            Ok(t) => t,
            Err(KinematicsError::DegenerateRollDirection) => continue,
            Err(e) => return Err(e.into()),
        };
        let pivot = joints.pivot(f)
            + (aligned - joints.pivot(f)).clamp(-config.pivot_rate_limit_rad, config.pivot_rate_limit_rad);
        let pivot = pivot.clamp(-config.pivot_limit_rad, config.pivot_limit_rad);
        targets.set_pivot(f, pivot);
        let next = forward_finger(config, f, joints.base(f), pivot)?;
        spins[f] = match roller_rate_for(dec.delta_x_cr, next.roller_axis, c.normal, config.roller_radius_mm) {
            Ok(w) => w,
            Err(KinematicsError::PoleContact) => 0.0,
            Err(e) => return Err(e.into()),
        };
    }

    let peak = spins.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let scale = if peak > config.roller_rate_limit_rad { config.roller_rate_limit_rad / peak } else { 1.0 };
    for f in 0..NUM_FINGERS {
        if spins[f] != 0.0 {
            targets.set_roller(f, joints.roller(f) + spins[f] * scale);
        }
        targets.set_base(f, grip_setpoint(config, f, x, joints.base(f))?);
    }

    let decompositions = decompositions.map(|d| d.expect("set for every finger"));
    Ok(ControlCommand {
        joint_targets: targets,
        degenerate_flags: decompositions.map(|d| d.degenerate),
        decompositions,
    })
}
