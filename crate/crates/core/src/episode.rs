//! Closed-loop episodes: a policy drives the simulated grasper from a
//! transformation's start pose toward its target, and every step is
//! recorded as a state-action pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{GrasperConfig, JointVector, ObjectModel, NUM_FINGERS};
use crate::controller::{step_policy, ControlError, TargetSpec};
use crate::eval::orientation_error;
use crate::kinematics::sphere_contact;
use crate::learner::state::{assemble_state, StateVec35};
use crate::sim::{SensorFrame, Sim, SimError, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

pub struct Observation<'a> {
    pub sensors: &'a SensorFrame,
    pub spec: &'a TargetSpec,
    pub step: u64,
}

impl Observation<'_> {
    pub fn state(&self) -> StateVec35 {
        assemble_state(self.sensors, self.spec)
    }
}

pub trait Policy {
    fn act(&mut self, obs: &Observation<'_>) -> Result<JointVector, ControlError>;
}

/// The handcrafted controller, fed only with sensor readings.
#[derive(Debug, Clone)]
pub struct HandcraftedPolicy {
    pub config: GrasperConfig,
}

impl HandcraftedPolicy {
    pub fn new(config: GrasperConfig) -> Self {
        Self { config }
    }
}

impl Policy for HandcraftedPolicy {
    fn act(&mut self, obs: &Observation<'_>) -> Result<JointVector, ControlError> {
        let cfg = &self.config;
        let joints = obs.sensors.joints_meas;
        let current = obs.sensors.object_pose_meas;
        let frames = std::array::from_fn(|f| {
            crate::kinematics::forward_finger(cfg, f, joints.base(f), joints.pivot(f))
                .expect("finger index in range")
        });
        let mut contacts = [None; NUM_FINGERS];
        for (f, fr) in frames.iter().enumerate() {
            contacts[f] = Some(sphere_contact(
                fr,
                cfg.roller_radius_mm,
                cfg.controller_object_radius_mm,
                current.position,
            )?);
        }
        let cmd = step_policy(cfg, &frames, &contacts, &current, &obs.spec.target, &joints)?;
        Ok(cmd.joint_targets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    Budget,
    Dropped,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::Budget => "budget",
            Termination::Dropped => "dropped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: u64,
    pub state: StateVec35,
    pub action: [f64; 9],
    /// True orientation error after the step.
    pub e_omega: f64,
    pub residuals: [f64; NUM_FINGERS],
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: TargetSpec,
    pub object: ObjectModel,
    pub seed: u64,
    pub termination: Termination,
    pub final_e_omega: f64,
    pub steps: Vec<TrajectoryStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOptions {
    pub max_steps: usize,
    /// Stop once the measured orientation error drops below this.
    pub stop_threshold: Option<f64>,
}

/// Default stop threshold on the orientation error.
pub const STOP_THRESHOLD: f64 = 5.0;

/// Runs `actor` in closed loop from `world`. Each recorded action is the
/// actor's own, or `labeler`'s action for the same observation when given.
pub fn run_episode(
    sim: &Sim,
    world: WorldState,
    spec: &TargetSpec,
    actor: &mut dyn Policy,
    mut labeler: Option<&mut dyn Policy>,
    opts: &EpisodeOptions,
) -> Result<(Trajectory, WorldState), EpisodeError> {
    let mut state = world;
    let mut steps = Vec::with_capacity(opts.max_steps.min(4096));
    let mut termination = Termination::Budget;
    let mut sensors = sim.read_sensors(&state);
    for _ in 0..opts.max_steps {
        let obs = Observation { sensors: &sensors, spec, step: state.step_index };
        let action = actor.act(&obs)?;
        let label = match labeler.as_deref_mut() {
            Some(l) => l.act(&obs)?,
            None => action,
        };
        let (next, twist) = sim.step(&state, &action)?;
        steps.push(TrajectoryStep {
            step: state.step_index,
            state: obs.state(),
            action: *label.as_array(),
            e_omega: orientation_error(spec.target.orientation, next.object.orientation),
            residuals: twist.slip_residual_per_contact,
            dropped: next.dropped,
        });
        state = next;
        sensors = sim.read_sensors(&state);
        if state.dropped {
            termination = Termination::Dropped;
            break;
        }
        if let Some(t) = opts.stop_threshold {
            if orientation_error(spec.target.orientation, sensors.object_pose_meas.orientation) < t {
                termination = Termination::Converged;
                break;
            }
        }
    }
    let trajectory = Trajectory {
        spec: *spec,
        object: state.object_model,
        seed: state.rng_seed,
        termination,
        final_e_omega: orientation_error(spec.target.orientation, state.object.orientation),
        steps,
    };
    Ok((trajectory, state))
}

/// Grasps the object at `spec.start` with `seed` and runs the episode.
pub fn rollout(
    sim: &Sim,
    object: ObjectModel,
    spec: &TargetSpec,
    seed: u64,
    actor: &mut dyn Policy,
    labeler: Option<&mut dyn Policy>,
    opts: &EpisodeOptions,
) -> Result<Trajectory, EpisodeError> {
    let world = sim.init_grasp(object, spec.start, seed)?;
    Ok(run_episode(sim, world, spec, actor, labeler, opts)?.0)
}
