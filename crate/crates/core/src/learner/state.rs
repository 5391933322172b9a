//! The 35-entry policy input.
//!
//! | range   | content                                    |
//! |---------|--------------------------------------------|
//! | 0..9    | joint readings                             |
//! | 9..12   | current object position (mm)               |
//! | 12..16  | current object quaternion                  |
//! | 16..19  | previous object position (mm)              |
//! | 19..23  | previous object quaternion                 |
//! | 23..26  | target position (mm)                       |
//! | 26..29  | target orientation, axis · angle           |
//! | 29..32  | initial position (mm)                      |
//! | 32..35  | initial orientation, axis · angle          |

use serde::{Deserialize, Serialize};

use crate::config::{JointVector, NUM_JOINTS};
use crate::controller::TargetSpec;
use crate::geometry::{Pose, UnitQuat, Vec3};
use crate::sim::SensorFrame;

pub const STATE_DIM: usize = 35;
pub const ACTION_DIM: usize = NUM_JOINTS;

pub mod slots {
    use std::ops::Range;
    pub const JOINTS: Range<usize> = 0..9;
    pub const POSITION: Range<usize> = 9..12;
    pub const QUAT: Range<usize> = 12..16;
    pub const PREV_POSITION: Range<usize> = 16..19;
    pub const PREV_QUAT: Range<usize> = 19..23;
    pub const TARGET_POSITION: Range<usize> = 23..26;
    pub const TARGET_ROTATION: Range<usize> = 26..29;
    pub const INITIAL_POSITION: Range<usize> = 29..32;
    pub const INITIAL_ROTATION: Range<usize> = 32..35;

    /// Slots holding millimetre positions.
    pub const POSITIONS: [Range<usize>; 4] =
        [POSITION, PREV_POSITION, TARGET_POSITION, INITIAL_POSITION];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateVec35(pub [f64; STATE_DIM]);

impl From<Vec<f64>> for StateVec35 {
    fn from(v: Vec<f64>) -> Self {
        let mut a = [0.0; STATE_DIM];
        for (dst, src) in a.iter_mut().zip(v) {
            *dst = src;
        }
        Self(a)
    }
}

impl From<StateVec35> for Vec<f64> {
    fn from(s: StateVec35) -> Self {
        s.0.to_vec()
    }
}

/// Fields recovered from a packed state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnpackedState {
    pub joints: [f64; NUM_JOINTS],
    pub current: Pose,
    pub previous: Pose,
    pub target_position: Vec3,
    pub target_rotation: Vec3,
    pub initial_position: Vec3,
    pub initial_rotation: Vec3,
}

fn put(dst: &mut [f64], src: &[f64]) {
    dst.copy_from_slice(src);
}

fn vec3(s: &[f64]) -> Vec3 {
    Vec3::new(s[0], s[1], s[2])
}

fn quat(s: &[f64]) -> UnitQuat {
    UnitQuat::from_array([s[0], s[1], s[2], s[3]]).unwrap_or(UnitQuat::IDENTITY)
}

pub fn assemble_state(sensors: &SensorFrame, spec: &TargetSpec) -> StateVec35 {
    use slots::*;
    let mut s = [0.0; STATE_DIM];
    put(&mut s[JOINTS], sensors.joints_meas.as_array());
    let cur = sensors.object_pose_meas;
    let prev = sensors.previous_object_pose_meas;
    put(&mut s[POSITION], &cur.position.to_array());
    put(&mut s[QUAT], &cur.orientation.to_array());
    put(&mut s[PREV_POSITION], &prev.position.to_array());
    put(&mut s[PREV_QUAT], &prev.orientation.to_array());
    put(&mut s[TARGET_POSITION], &spec.target.position.to_array());
    put(&mut s[TARGET_ROTATION], &spec.target.orientation.to_angle_axis().rotation_vector().to_array());
    put(&mut s[INITIAL_POSITION], &spec.start.position.to_array());
    put(&mut s[INITIAL_ROTATION], &spec.start.orientation.to_angle_axis().rotation_vector().to_array());
    StateVec35(s)
}

impl StateVec35 {
    pub fn unpack(&self) -> UnpackedState {
        use slots::*;
        let s = &self.0;
        let mut joints = [0.0; NUM_JOINTS];
        joints.copy_from_slice(&s[JOINTS]);
        UnpackedState {
            joints,
            current: Pose::new(vec3(&s[POSITION]), quat(&s[QUAT])),
            previous: Pose::new(vec3(&s[PREV_POSITION]), quat(&s[PREV_QUAT])),
            target_position: vec3(&s[TARGET_POSITION]),
            target_rotation: vec3(&s[TARGET_ROTATION]),
            initial_position: vec3(&s[INITIAL_POSITION]),
            initial_rotation: vec3(&s[INITIAL_ROTATION]),
        }
    }

    /// Sensor frame and transformation this state was packed from, up to the
    /// angle-axis round trip of the two spec orientations.
    pub fn to_observation(&self) -> (SensorFrame, TargetSpec) {
        let u = self.unpack();
        let sensors = SensorFrame {
            joints_meas: JointVector::clamped(u.joints),
            object_pose_meas: u.current,
            previous_object_pose_meas: u.previous,
        };
        let spec = TargetSpec {
            start: Pose::new(u.initial_position, UnitQuat::from_rotation_vector(u.initial_rotation)),
            target: Pose::new(u.target_position, UnitQuat::from_rotation_vector(u.target_rotation)),
        };
        (sensors, spec)
    }
}
