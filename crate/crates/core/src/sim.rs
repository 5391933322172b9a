//! Deterministic kinematic rolling world.
//!
//! Each step the pivot and roller joints move toward their targets under
//! rate limits. The displacement of every roller's surface at its contact
//! is collected, and the object twist is the least-squares fit of those
//! displacements under rolling without slipping. Base joints are compliant:
//! they close toward their targets but never penetrate the object, and are
//! pushed back when the object moves into them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, GrasperConfig, JointVector, ObjectModel, NUM_FINGERS};
use crate::geometry::{Pose, UnitQuat, Vec3};
use crate::kinematics::{
    contact_geometry, forward_finger, zero_gap_base_angle, zero_gap_base_angle_near, ContactState,
    FingerFrames, KinematicsError, CONTACT_TOLERANCE_MM,
};
use crate::rng::{rng_for, stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("object already dropped")]
    AlreadyDropped,
    #[error("object unreachable by finger {finger}")]
    Unreachable { finger: usize },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub sigma_pos_mm: f64,
    pub sigma_ang_rad: f64,
    /// A roller further than this from the object counts as a drop.
    pub drop_gap_mm: f64,
    /// Fall of the object centre below its grasp height that counts as a drop.
    pub drop_fall_mm: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            sigma_pos_mm: 1.0,
            sigma_ang_rad: 1f64.to_radians(),
            drop_gap_mm: 5.0,
            drop_fall_mm: 30.0,
        }
    }
}

impl SimParams {
    pub fn noiseless() -> Self {
        Self { sigma_pos_mm: 0.0, sigma_ang_rad: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.sigma_pos_mm) {
            return Err(ConfigError::Invalid { field: "sigma_pos_mm", reason: "must be >= 0".into() });
        }
        if !ok(self.sigma_ang_rad) {
            return Err(ConfigError::Invalid { field: "sigma_ang_rad", reason: "must be >= 0".into() });
        }
        if !(self.drop_gap_mm > 0.0) {
            return Err(ConfigError::Invalid { field: "drop_gap_mm", reason: "must be > 0".into() });
        }
        if !(self.drop_fall_mm > 0.0) {
            return Err(ConfigError::Invalid { field: "drop_fall_mm", reason: "must be > 0".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub joints: JointVector,
    pub object: Pose,
    /// True object pose one step earlier (equal to `object` at step 0).
    pub previous_object: Pose,
    pub object_model: ObjectModel,
    pub contacts: [ContactState; NUM_FINGERS],
    pub step_index: u64,
    pub rng_seed: u64,
    pub dropped: bool,
    pub grasp_height_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub joints_meas: JointVector,
    pub object_pose_meas: Pose,
    pub previous_object_pose_meas: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistSolve {
    pub v: Vec3,
    pub omega: Vec3,
    /// mm per step; zero for rollers out of contact.
    pub slip_residual_per_contact: [f64; NUM_FINGERS],
}

impl TwistSolve {
    pub const ZERO: TwistSolve =
        TwistSolve { v: Vec3::ZERO, omega: Vec3::ZERO, slip_residual_per_contact: [0.0; 3] };
}

/// One contact constraint for the twist fit: the object's material point at
/// `point` should move by `surface_displacement`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingConstraint {
    pub finger: usize,
    pub point: Vec3,
    pub surface_displacement: Vec3,
}

/// Refinement sweeps after the SVD solve.
const REFINE_SWEEPS: usize = 6;

/// Least-squares object twist about `x_obj`:
/// `argmin Σ ‖v + ω × (p_i − x_obj) − u_i‖²`, minimum-norm when the
/// constraints do not determine the twist.
pub fn solve_object_twist(constraints: &[RollingConstraint], x_obj: Vec3) -> TwistSolve {
    if constraints.is_empty() {
        return TwistSolve::ZERO;
    }
    let rows = 3 * constraints.len();
    let mut a = DMatrix::<f64>::zeros(rows, 6);
    let mut b = DVector::<f64>::zeros(rows);
    for (k, c) in constraints.iter().enumerate() {
        let d = c.point - x_obj;
        let r = 3 * k;
        // v + ω × d = v − [d]× ω
        for i in 0..3 {
            a[(r + i, i)] = 1.0;
        }
        a[(r, 4)] = d.z;
        a[(r, 5)] = -d.y;
        a[(r + 1, 3)] = -d.z;
        a[(r + 1, 5)] = d.x;
        a[(r + 2, 3)] = d.y;
        a[(r + 2, 4)] = -d.x;
        let u = c.surface_displacement;
        b[r] = u.x;
        b[r + 1] = u.y;
        b[r + 2] = u.z;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (smax * 1e-10).max(1e-300);
    let mut x = svd.solve(&b, eps).unwrap_or_else(|_| DVector::zeros(6));
    // nalgebra's SVD can be off by ~1e-5 relative even on well-conditioned
    // inputs, so polish with V Σ⁻² Vᵀ as a preconditioner on the normal
    // equations. In the full-rank case the fixed point is the exact fit.
    if let Some(v_t) = svd.v_t.as_ref() {
        let s = &svd.singular_values;
        for _ in 0..REFINE_SWEEPS {
            let mut y = v_t * (a.transpose() * (&b - &a * &x));
            for i in 0..y.len() {
                y[i] = if s[i] > eps { y[i] / (s[i] * s[i]) } else { 0.0 };
            }
            let dx = v_t.transpose() * y;
            x += &dx;
            if dx.amax() <= 1e-15 * x.amax() {
                break;
            }
        }
    }
    let fit = &a * &x - &b;
    let mut res = [0.0; NUM_FINGERS];
    for (k, c) in constraints.iter().enumerate() {
        let r = 3 * k;
        res[c.finger] = (fit[r].powi(2) + fit[r + 1].powi(2) + fit[r + 2].powi(2)).sqrt();
    }
    TwistSolve {
        v: Vec3::new(x[0], x[1], x[2]),
        omega: Vec3::new(x[3], x[4], x[5]),
        slip_residual_per_contact: res,
    }
}

fn step_toward(current: f64, target: f64, limit: f64) -> f64 {
    current + (target - current).clamp(-limit, limit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sim {
    pub config: GrasperConfig,
    pub params: SimParams,
}

impl Sim {
    pub fn new(config: GrasperConfig, params: SimParams) -> Result<Self, SimError> {
        config.validate()?;
        params.validate()?;
        Ok(Self { config, params })
    }

    pub fn frames(&self, joints: &JointVector) -> [FingerFrames; NUM_FINGERS] {
        std::array::from_fn(|f| {
            forward_finger(&self.config, f, joints.base(f), joints.pivot(f))
                .expect("finger index in range")
        })
    }

    fn contacts(
        &self,
        joints: &JointVector,
        obj: &ObjectModel,
        pose: &Pose,
    ) -> Result<[ContactState; NUM_FINGERS], SimError> {
        let frames = self.frames(joints);
        let mut out = [ContactState { point: Vec3::ZERO, normal: Vec3::X, gap_mm: 0.0 }; 3];
        for (f, fr) in frames.iter().enumerate() {
            out[f] = contact_geometry(fr, self.config.roller_radius_mm, obj, pose)?;
        }
        Ok(out)
    }

    /// Closes every base joint from fully open until its roller touches the
    /// object; pivots and rollers start at zero.
    pub fn init_grasp(
        &self,
        object_model: ObjectModel,
        start: Pose,
        seed: u64,
    ) -> Result<WorldState, SimError> {
        object_model.validate()?;
        let mut joints = JointVector::ZERO;
        for f in 0..NUM_FINGERS {
            let t = zero_gap_base_angle(&self.config, f, &object_model, &start)
                .map_err(|_| SimError::Unreachable { finger: f })?;
            joints.set_base(f, t);
        }
        let contacts = self.contacts(&joints, &object_model, &start)?;
        Ok(WorldState {
            joints,
            object: start,
            previous_object: start,
            object_model,
            contacts,
            step_index: 0,
            rng_seed: seed,
            dropped: false,
            grasp_height_mm: start.position.z,
        })
    }

    /// Advances the world by one step toward the commanded joint targets.
    pub fn step(
        &self,
        state: &WorldState,
        targets: &JointVector,
    ) -> Result<(WorldState, TwistSolve), SimError> {
        if state.dropped {
            return Err(SimError::AlreadyDropped);
        }
        let cfg = &self.config;
        let old = state.joints;
        let mut joints = old;
        for f in 0..NUM_FINGERS {
            let pivot = step_toward(old.pivot(f), targets.pivot(f), cfg.pivot_rate_limit_rad)
                .clamp(-cfg.pivot_limit_rad, cfg.pivot_limit_rad);
            joints.set_pivot(f, pivot);
            joints.set_roller(
                f,
                step_toward(old.roller(f), targets.roller(f), cfg.roller_rate_limit_rad),
            );
        }

        // Surface displacement of each touching roller at its contact point.
        let r = cfg.roller_radius_mm;
        let moved = self.frames(&joints);
        let constraints: Vec<RollingConstraint> = (0..NUM_FINGERS)
            .filter(|&f| state.contacts[f].gap_mm <= CONTACT_TOLERANCE_MM)
            .map(|f| {
                let c = &state.contacts[f];
                let arm = c.normal * r;
                let d_pivot = joints.pivot(f) - old.pivot(f);
                let d_roll = joints.roller(f) - old.roller(f);
                let u = moved[f].pivot_axis.cross(arm) * d_pivot
                    + moved[f].roller_axis.cross(arm) * d_roll;
                RollingConstraint { finger: f, point: c.point, surface_displacement: u }
            })
            .collect();
        let twist = solve_object_twist(&constraints, state.object.position);

        let object = Pose::new(
            state.object.position + twist.v,
            UnitQuat::from_rotation_vector(twist.omega).mul(state.object.orientation),
        );

        // Compliant base joints.
        for f in 0..NUM_FINGERS {
            let desired = step_toward(old.base(f), targets.base(f), cfg.base_rate_limit_rad);
            let base = match zero_gap_base_angle_near(cfg, f, &state.object_model, &object, old.base(f))
            {
                Ok(touch) => desired.max(touch),
                Err(_) => desired,
            };
            joints.set_base(f, base);
        }

        let contacts = self.contacts(&joints, &state.object_model, &object)?;
        let mut next = WorldState {
            joints,
            object,
            previous_object: state.object,
            object_model: state.object_model,
            contacts,
            step_index: state.step_index + 1,
            rng_seed: state.rng_seed,
            dropped: false,
            grasp_height_mm: state.grasp_height_mm,
        };
        next.dropped = self.check_drop(&next);
        Ok((next, twist))
    }

    pub fn check_drop(&self, state: &WorldState) -> bool {
        state.dropped
            || state.contacts.iter().any(|c| c.gap_mm > self.params.drop_gap_mm)
            || state.object.position.z < state.grasp_height_mm - self.params.drop_fall_mm
    }

    fn measure(&self, truth: &Pose, seed: u64, step: u64) -> Pose {
        let p = &self.params;
        if p.sigma_pos_mm == 0.0 && p.sigma_ang_rad == 0.0 {
            return *truth;
        }
        let mut rng = rng_for(seed, stream::SENSOR, step);
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        let dp = Vec3::new(normal(), normal(), normal()) * p.sigma_pos_mm;
        let axis = Vec3::new(normal(), normal(), normal()).try_normalize(1e-12).unwrap_or(Vec3::Z);
        let angle = normal() * p.sigma_ang_rad;
        Pose::new(
            truth.position + dp,
            UnitQuat::from_rotation_vector(axis * angle).mul(truth.orientation),
        )
    }

    /// Joint readings are exact; object pose readings carry Gaussian noise
    /// drawn from `(seed, step_index)`.
    pub fn read_sensors(&self, state: &WorldState) -> SensorFrame {
        let now = self.measure(&state.object, state.rng_seed, state.step_index);
        let previous = if state.step_index == 0 {
            now
        } else {
            self.measure(&state.previous_object, state.rng_seed, state.step_index - 1)
        };
        SensorFrame {
            joints_meas: state.joints,
            object_pose_meas: now,
            previous_object_pose_meas: previous,
        }
    }
}
