//! Expert demonstrations and DAgger aggregation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::policy::{LearnedPolicy, PolicyNet};
use super::train::{continue_training, Dataset, LearnError, TrainHyper};
use crate::config::{JointVector, ObjectModel};
use crate::controller::{ControlError, TargetSpec};
use crate::episode::{rollout, EpisodeOptions, HandcraftedPolicy, Observation, Policy, Trajectory};
use crate::eval::{default_axes, SuiteName, GRASP_CENTER};
use crate::geometry::{Pose, UnitQuat, Vec3};
use crate::rng::{rng_for, split_seed, stream};
use crate::sim::Sim;

/// One episode to run: transformation, object and world seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub spec: TargetSpec,
    pub object: ObjectModel,
    pub seed: u64,
}

fn quarter_turn(axis: Vec3) -> TargetSpec {
    let start = Pose::from_position(GRASP_CENTER);
    let q = UnitQuat::from_axis_angle(axis, std::f64::consts::FRAC_PI_2).expect("unit axis");
    TargetSpec { start, target: Pose::new(GRASP_CENTER, q) }
}

/// `n` quarter turns cycling through the S-suite axes, each with its own
/// world seed.
pub fn s_suite_tasks(n: usize, object: ObjectModel, seed: u64) -> Vec<Task> {
    let axes = default_axes(SuiteName::S);
    (0..n)
        .map(|i| Task {
            spec: quarter_turn(axes[i % axes.len()]),
            object,
            seed: split_seed(seed, stream::SPECS, i as u64),
        })
        .collect()
}

/// `n` quarter turns about random axes within ~20° of vertical.
pub fn z_dominant_tasks(n: usize, object: ObjectModel, seed: u64) -> Vec<Task> {
    let mut rng = rng_for(seed, stream::SPECS, u64::MAX);
    (0..n)
        .map(|i| {
            let axis = Vec3::new(rng.gen_range(-0.35..0.35), rng.gen_range(-0.35..0.35), 1.0)
                .try_normalize(0.0)
                .expect("nonzero");
            Task { spec: quarter_turn(axis), object, seed: split_seed(seed, stream::SPECS, i as u64) }
        })
        .collect()
}

/// Handcrafted-controller rollouts of every task, in order.
pub fn expert_trajectories(sim: &Sim, tasks: &[Task], opts: &EpisodeOptions) -> Result<Vec<Trajectory>, LearnError> {
    tasks
        .iter()
        .map(|t| {
            let mut expert = HandcraftedPolicy::new(sim.config.clone());
            Ok(rollout(sim, t.object, &t.spec, t.seed, &mut expert, None, opts)?)
        })
        .collect()
}

/// Per step, the expert with probability `beta`, otherwise the learner.
pub struct MixturePolicy {
    pub expert: HandcraftedPolicy,
    pub learner: LearnedPolicy,
    pub beta: f64,
    rng: ChaCha8Rng,
}

impl MixturePolicy {
    pub fn new(expert: HandcraftedPolicy, learner: LearnedPolicy, beta: f64, rng: ChaCha8Rng) -> Self {
        Self { expert, learner, beta, rng }
    }
}

impl Policy for MixturePolicy {
    fn act(&mut self, obs: &Observation<'_>) -> Result<JointVector, ControlError> {
        if self.rng.gen::<f64>() < self.beta {
            self.expert.act(obs)
        } else {
            self.learner.act(obs)
        }
    }
}

/// Mixing weight of DAgger round `k` (round 0 is pure expert data).
pub fn beta_schedule(k: usize) -> f64 {
    0.5f64.powi(k as i32)
}

/// Rolls the `beta`-mixture out on every task and returns the visited
/// states labelled with the expert's actions.
pub fn dagger_round(
    sim: &Sim,
    net: &PolicyNet,
    tasks: &[Task],
    beta: f64,
    opts: &EpisodeOptions,
    seed: u64,
) -> Result<Vec<Trajectory>, LearnError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(LearnError::InvalidBeta(beta));
    }
    tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut mixture = MixturePolicy::new(
                HandcraftedPolicy::new(sim.config.clone()),
                LearnedPolicy::new(net.clone()),
                beta,
                rng_for(seed, stream::MIXTURE, i as u64),
            );
            let mut labeler = HandcraftedPolicy::new(sim.config.clone());
            Ok(rollout(sim, t.object, &t.spec, t.seed, &mut mixture, Some(&mut labeler), opts)?)
        })
        .collect()
}

/// Outcome of a DAgger run.
pub struct DaggerRun {
    pub net: PolicyNet,
    pub dataset: Dataset,
    /// Dataset size before round 1 and after each round.
    pub sizes: Vec<usize>,
}

/// Runs `rounds` rounds starting from a network trained on `dataset`;
/// round `k` (1-based) mixes with `beta_schedule(k)`, aggregates and retrains.
#[allow(clippy::too_many_arguments)]
pub fn run_dagger(
    sim: &Sim,
    mut net: PolicyNet,
    mut dataset: Dataset,
    tasks: &[Task],
    rounds: usize,
    opts: &EpisodeOptions,
    hyper: &TrainHyper,
) -> Result<DaggerRun, LearnError> {
    let mut sizes = vec![dataset.len()];
    for k in 1..=rounds {
        let round_seed = split_seed(hyper.seed, stream::MIXTURE, k as u64);
        let round_tasks: Vec<Task> =
            tasks.iter().map(|t| Task { seed: split_seed(t.seed, stream::MIXTURE, k as u64), ..*t }).collect();
        for t in dagger_round(sim, &net, &round_tasks, beta_schedule(k), opts, round_seed)? {
            dataset.extend_from(&t);
        }
        sizes.push(dataset.len());
        net = continue_training(net, &dataset, &TrainHyper { seed: round_seed, ..*hyper })?;
    }
    Ok(DaggerRun { net, dataset, sizes })
}
