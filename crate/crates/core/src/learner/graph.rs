//! Demonstration set: stored trajectories, the transformations they realise,
//! and a graph over object poses whose edges are those transformations.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::train::LearnError;
use crate::config::ObjectModel;
use crate::controller::TargetSpec;
use crate::episode::{rollout, EpisodeOptions, Policy, Termination, Trajectory, STOP_THRESHOLD};
use crate::eval::orientation_error;
use crate::geometry::Pose;
use crate::sim::Sim;

/// Distance tolerance between two poses: position in mm, orientation in
/// orientation-error units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseTolerance {
    pub pos_mm: f64,
    pub ang: f64,
}

impl PoseTolerance {
    /// Nearness for accepting interpolated transformations.
    pub const NEARBY: PoseTolerance = PoseTolerance { pos_mm: 10.0, ang: 10.0 };
    /// Poses closer than this share a graph node.
    pub const SAME_NODE: PoseTolerance = PoseTolerance { pos_mm: 1.0, ang: 1.0 };

    pub fn matches(&self, a: &Pose, b: &Pose) -> bool {
        (a.position - b.position).norm() <= self.pos_mm
            && orientation_error(a.orientation, b.orientation) <= self.ang
    }

    pub fn specs_near(&self, a: &TargetSpec, b: &TargetSpec) -> bool {
        self.matches(&a.start, &b.start) && self.matches(&a.target, &b.target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Index into `DemoSet::trajectories`.
    pub trajectory: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSet {
    pub trajectories: Vec<Trajectory>,
    pub nodes: Vec<Pose>,
    pub edges: Vec<Edge>,
    pub node_tolerance: PoseTolerance,
}

impl Default for DemoSet {
    fn default() -> Self {
        Self { trajectories: Vec::new(), nodes: Vec::new(), edges: Vec::new(), node_tolerance: PoseTolerance::SAME_NODE }
    }
}

impl DemoSet {
    pub fn from_trajectories(trajs: impl IntoIterator<Item = Trajectory>) -> Self {
        let mut d = Self::default();
        for t in trajs {
            d.insert(t);
        }
        d
    }

    /// Known transformations, one per stored trajectory.
    pub fn specs(&self) -> impl Iterator<Item = &TargetSpec> {
        self.trajectories.iter().map(|t| &t.spec)
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn find_node(&self, pose: &Pose) -> Option<usize> {
        self.nodes.iter().position(|n| self.node_tolerance.matches(n, pose))
    }

    fn node_for(&mut self, pose: &Pose) -> usize {
        self.find_node(pose).unwrap_or_else(|| {
            self.nodes.push(*pose);
            self.nodes.len() - 1
        })
    }

    /// Stores `t` and links its start and target poses.
    pub fn insert(&mut self, t: Trajectory) {
        let from = self.node_for(&t.spec.start);
        let to = self.node_for(&t.spec.target);
        self.edges.push(Edge { from, to, trajectory: self.trajectories.len() });
        self.trajectories.push(t);
    }

    /// Whether some stored transformation lies within `tol` of `spec`.
    pub fn is_near(&self, spec: &TargetSpec, tol: PoseTolerance) -> bool {
        self.specs().any(|s| tol.specs_near(s, spec))
    }

    /// Index of the stored trajectory whose transformation is closest to
    /// `spec`, scoring each pose by `pos_mm / tol.pos_mm + e_ω / tol.ang`
    /// and summing start and target. Ties go to the earliest stored.
    pub fn nearest(&self, spec: &TargetSpec, tol: PoseTolerance) -> Option<usize> {
        let pose_cost = |a: &Pose, b: &Pose| {
            (a.position - b.position).norm() / tol.pos_mm + orientation_error(a.orientation, b.orientation) / tol.ang
        };
        self.specs()
            .map(|s| pose_cost(&s.start, &spec.start) + pose_cost(&s.target, &spec.target))
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, c)| match best {
                Some((_, b)) if b <= c => best,
                _ => Some((i, c)),
            })
            .map(|(i, _)| i)
    }

    /// Fewest-edge sequence of known transformations from `from` to `to`;
    /// ties go to edges inserted first.
    pub fn plan_path(&self, from: &Pose, to: &Pose) -> Result<Vec<TargetSpec>, LearnError> {
        let a = self.find_node(from).ok_or(LearnError::NoPath)?;
        let b = self.find_node(to).ok_or(LearnError::NoPath)?;
        if a == b {
            return Ok(Vec::new());
        }
        let mut via: Vec<Option<usize>> = vec![None; self.nodes.len()];
        let mut seen = vec![false; self.nodes.len()];
        seen[a] = true;
        let mut queue = VecDeque::from([a]);
        while let Some(n) = queue.pop_front() {
            for (ei, e) in self.edges.iter().enumerate() {
                if e.from == n && !seen[e.to] {
                    seen[e.to] = true;
                    via[e.to] = Some(ei);
                    queue.push_back(e.to);
                }
            }
        }
        if !seen[b] {
            return Err(LearnError::NoPath);
        }
        let mut path = Vec::new();
        let mut n = b;
        while let Some(ei) = via[n] {
            let e = self.edges[ei];
            path.push(self.trajectories[e.trajectory].spec);
            n = e.from;
        }
        path.reverse();
        Ok(path)
    }
}

/// Rolls `policy` out on `candidate`; when it succeeds and the candidate is
/// within `tol` of a known transformation, the rollout joins `demos`.
/// Returns whether it was added.
#[allow(clippy::too_many_arguments)]
pub fn accumulate(
    demos: &mut DemoSet,
    candidate: &TargetSpec,
    policy: &mut dyn Policy,
    sim: &Sim,
    object: ObjectModel,
    seed: u64,
    opts: &EpisodeOptions,
    tol: PoseTolerance,
) -> bool {
    if !demos.is_near(candidate, tol) {
        return false;
    }
    let Ok(t) = rollout(sim, object, candidate, seed, policy, None, opts) else {
        return false;
    };
    let threshold = opts.stop_threshold.unwrap_or(STOP_THRESHOLD);
    if t.termination == Termination::Dropped || t.final_e_omega >= threshold {
        return false;
    }
    demos.insert(t);
    true
}
