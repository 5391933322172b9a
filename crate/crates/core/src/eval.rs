//! Orientation-error metric and the S / D / N evaluation batteries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ObjectModel;
use crate::controller::TargetSpec;
use crate::episode::{rollout, EpisodeOptions, Policy, Termination};
use crate::geometry::{Pose, UnitQuat, Vec3};
use crate::rng::{split_seed, stream};
use crate::sim::Sim;

/// Quaternion distance scaled to `[0, 100]`:
/// `100 · min(‖q_d − q_c‖, ‖q_d + q_c‖) / √2`.
pub fn orientation_error(q_d: UnitQuat, q_c: UnitQuat) -> f64 {
    let a = q_d.to_array();
    let b = q_c.to_array();
    let mut minus = 0.0;
    let mut plus = 0.0;
    for i in 0..4 {
        minus += (a[i] - b[i]) * (a[i] - b[i]);
        plus += (a[i] + b[i]) * (a[i] + b[i]);
    }
    100.0 * minus.min(plus).sqrt() / std::f64::consts::SQRT_2
}

/// Mean and sample (n − 1) standard deviation; the deviation of fewer than
/// two samples is zero.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SuiteName {
    S,
    D,
    N,
}

impl SuiteName {
    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::S => "S",
            SuiteName::D => "D",
            SuiteName::N => "N",
        }
    }
}

impl std::str::FromStr for SuiteName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S" | "s" => Ok(SuiteName::S),
            "D" | "d" => Ok(SuiteName::D),
            "N" | "n" => Ok(SuiteName::N),
            other => Err(format!("unknown suite `{other}` (expected S, D or N)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteCase {
    pub axis: Vec3,
    pub angle_rad: f64,
    pub object: ObjectModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub name: SuiteName,
    pub cases: Vec<SuiteCase>,
    pub trials: usize,
    pub seed: u64,
}

/// Object centre for every suite episode.
pub const GRASP_CENTER: Vec3 = Vec3::new(0.0, 0.0, 170.0);

fn unit(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z).try_normalize(0.0).expect("nonzero axis")
}

/// Rotation axes of the default batteries: S leans on the vertical, D lies
/// mostly in the horizontal plane, N reuses two D axes on the 6×6×8 cm prism.
pub fn default_axes(name: SuiteName) -> Vec<Vec3> {
    match name {
        SuiteName::S => vec![
            unit(0.0, 0.0, 1.0),
            unit(0.25, 0.0, 0.968),
            unit(0.0, 0.25, 0.968),
            unit(0.35, 0.35, 0.868),
            unit(-0.25, 0.0, 0.968),
        ],
        SuiteName::D => vec![
            unit(1.0, 0.0, 0.0),
            unit(0.0, 1.0, 0.0),
            unit(0.707, 0.707, 0.0),
            unit(0.968, 0.0, 0.25),
            unit(0.0, 0.968, 0.25),
            unit(0.707, -0.707, 0.0),
        ],
        SuiteName::N => vec![unit(1.0, 0.0, 0.0), unit(0.968, 0.0, 0.25)],
    }
}

impl SuiteSpec {
    /// Quarter turns about the default axes; S and D use `object`, N the prism.
    pub fn default_for(name: SuiteName, object: ObjectModel, trials: usize, seed: u64) -> Self {
        let object = if name == SuiteName::N { ObjectModel::prism_6x6x8() } else { object };
        let cases = default_axes(name)
            .into_iter()
            .map(|axis| SuiteCase { axis, angle_rad: std::f64::consts::FRAC_PI_2, object })
            .collect();
        Self { name, cases, trials, seed }
    }

    pub fn target_spec(case: &SuiteCase) -> TargetSpec {
        let start = Pose::from_position(GRASP_CENTER);
        let q = UnitQuat::from_axis_angle(case.axis, case.angle_rad).unwrap_or(UnitQuat::IDENTITY);
        TargetSpec { start, target: Pose::new(GRASP_CENTER, q) }
    }

    pub fn trial_seed(&self, case: usize, trial: usize) -> u64 {
        split_seed(self.seed, stream::EPISODE, ((case as u64) << 32) | trial as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub final_e_omega: f64,
    pub steps: usize,
    pub termination: Termination,
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case: SuiteCase,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: SuiteName,
    pub cases: Vec<CaseResult>,
    pub mean: f64,
    pub std: f64,
    pub drop_count: usize,
}

impl SuiteResult {
    pub fn from_cases(name: SuiteName, cases: Vec<CaseResult>) -> Self {
        let samples: Vec<f64> =
            cases.iter().flat_map(|c| c.trials.iter().map(|t| t.final_e_omega)).collect();
        let (mean, std) = mean_std(&samples);
        let drop_count = cases.iter().flat_map(|c| &c.trials).filter(|t| t.dropped).count();
        Self { name, cases, mean, std, drop_count }
    }

    pub fn samples(&self) -> Vec<f64> {
        self.cases.iter().flat_map(|c| c.trials.iter().map(|t| t.final_e_omega)).collect()
    }
}

/// Score given to trials that drop the object or fault.
pub const FAILED_E_OMEGA: f64 = 100.0;

/// Runs every (case, trial) with a fresh policy from `make_policy`. Trials
/// that drop, fail to grasp or fault score `FAILED_E_OMEGA` and count as drops.
pub fn run_suite(
    sim: &Sim,
    suite: &SuiteSpec,
    make_policy: &mut dyn FnMut() -> Box<dyn Policy>,
    opts: &EpisodeOptions,
) -> SuiteResult {
    let cases = suite
        .cases
        .iter()
        .enumerate()
        .map(|(ci, case)| {
            let spec = SuiteSpec::target_spec(case);
            let trials = (0..suite.trials)
                .map(|ti| {
                    let mut policy = make_policy();
                    let seed = suite.trial_seed(ci, ti);
                    match rollout(sim, case.object, &spec, seed, policy.as_mut(), None, opts) {
                        Ok(t) => {
                            let dropped = t.termination == Termination::Dropped;
                            TrialResult {
                                final_e_omega: if dropped { FAILED_E_OMEGA } else { t.final_e_omega },
                                steps: t.steps.len(),
                                termination: t.termination,
                                dropped,
                            }
                        }
                        Err(_) => TrialResult {
                            final_e_omega: FAILED_E_OMEGA,
                            steps: 0,
                            termination: Termination::Dropped,
                            dropped: true,
                        },
                    }
                })
                .collect();
            CaseResult { case: *case, trials }
        })
        .collect();
    SuiteResult::from_cases(suite.name, cases)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("no results to report")]
    Empty,
    #[error("suite {0} has differently shaped results across policies")]
    Mismatched(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub suite: SuiteName,
    pub axis: Vec3,
    pub angle_rad: f64,
    /// Mean final error over trials, one entry per policy column.
    pub cells: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFooter {
    pub suite: SuiteName,
    /// `(mean, std)` per policy column.
    pub stats: Vec<(f64, f64)>,
    /// Second column's mean minus the first's, when exactly two policies.
    pub delta_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub policies: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub footers: Vec<ReportFooter>,
}

/// Side-by-side table of suite results; every policy must have run the same
/// suites with the same cases.
pub fn compare_report(results: &[(String, SuiteResult)]) -> Result<ReportTable, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut policies: Vec<String> = Vec::new();
    let mut suites: Vec<SuiteName> = Vec::new();
    for (p, r) in results {
        if !policies.contains(p) {
            policies.push(p.clone());
        }
        if !suites.contains(&r.name) {
            suites.push(r.name);
        }
    }
    let mut rows = Vec::new();
    let mut footers = Vec::new();
    for suite in suites {
        let per_policy: Vec<&SuiteResult> = policies
            .iter()
            .map(|p| {
                results
                    .iter()
                    .find(|(q, r)| q == p && r.name == suite)
                    .map(|(_, r)| r)
                    .ok_or_else(|| ReportError::Mismatched(suite.as_str().into()))
            })
            .collect::<Result<_, _>>()?;
        let shape = &per_policy[0].cases;
        for r in &per_policy {
            let same = r.cases.len() == shape.len()
                && r.cases.iter().zip(shape).all(|(a, b)| a.case.axis == b.case.axis);
            if !same {
                return Err(ReportError::Mismatched(suite.as_str().into()));
            }
        }
        for (ci, c) in shape.iter().enumerate() {
            let cells = per_policy
                .iter()
                .map(|r| {
                    let xs: Vec<f64> = r.cases[ci].trials.iter().map(|t| t.final_e_omega).collect();
                    mean_std(&xs).0
                })
                .collect();
            rows.push(ReportRow { suite, axis: c.case.axis, angle_rad: c.case.angle_rad, cells });
        }
        let stats: Vec<(f64, f64)> = per_policy.iter().map(|r| (r.mean, r.std)).collect();
        let delta_mean = (stats.len() == 2).then(|| stats[1].0 - stats[0].0);
        footers.push(ReportFooter { suite, stats, delta_mean });
    }
    Ok(ReportTable { policies, rows, footers })
}
