//! Subcommand bodies. Each takes its inputs explicitly and writes progress
//! to `log`, so they can be driven from tests as well as from `main`.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use rollergrasp_core::episode::{HandcraftedPolicy, Policy, Termination, Trajectory};
use rollergrasp_core::eval::{compare_report, run_suite, SuiteName, SuiteResult, SuiteSpec};
use rollergrasp_core::learner::dagger::{
    beta_schedule, expert_trajectories, run_dagger, s_suite_tasks, z_dominant_tasks, Task,
};
use rollergrasp_core::learner::graph::DemoSet;
use rollergrasp_core::learner::policy::LearnedPolicy;
use rollergrasp_core::learner::train::{train_bc, Dataset};
use rollergrasp_core::sim::Sim;

use crate::config::{RunConfig, SpecSet};
use crate::formats::{
    collect_trajectory_files, read_trajectory, read_weights, report_records, report_to_csv, summary_to_csv,
    write_atomic, write_demo_set, write_manifest, write_trajectory, write_weights, ArtifactManifest,
};

/// Loss reduction factor that counts as converged training.
pub const CONVERGENCE_FACTOR: f64 = 10.0;

fn sim_for(cfg: &RunConfig) -> Result<Sim> {
    Ok(Sim::new(cfg.grasper.clone(), cfg.sensors.clone())?)
}

pub fn expert_tasks(cfg: &RunConfig) -> Vec<Task> {
    match cfg.expert.specs {
        SpecSet::SSuite => s_suite_tasks(cfg.expert.count, cfg.object, cfg.seed),
        SpecSet::ZDominant => z_dominant_tasks(cfg.expert.count, cfg.object, cfg.seed),
    }
}

pub fn trajectory_file_name(i: usize) -> String {
    format!("traj_{i:04}.jsonl")
}

/// Runs the handcrafted controller over the configured specs and writes one
/// trajectory file per episode.
pub fn gen_expert(cfg: &RunConfig, out: &Path, log: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let sim = sim_for(cfg)?;
    let tasks = expert_tasks(cfg);
    let trajs = expert_trajectories(&sim, &tasks, &cfg.episode_options())?;
    let mut names = Vec::with_capacity(trajs.len());
    for (i, t) in trajs.iter().enumerate() {
        let name = trajectory_file_name(i);
        write_trajectory(&out.join(&name), t)?;
        names.push(name);
    }
    let ok = trajs.iter().filter(|t| t.termination == Termination::Converged).count();
    let mean_steps = trajs.iter().map(|t| t.steps.len()).sum::<usize>() as f64 / trajs.len().max(1) as f64;
    writeln!(
        log,
        "expert episodes: {}  success rate: {:.3}  mean steps: {:.1}",
        trajs.len(),
        ok as f64 / trajs.len().max(1) as f64,
        mean_steps
    )?;
    write_manifest(out, &ArtifactManifest::new("gen-expert", cfg.seed, &cfg.hash(), names.clone()))?;
    Ok(names.into_iter().map(|n| out.join(n)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub weights: PathBuf,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Aggregated dataset size before DAgger and after each round.
    pub dataset_sizes: Vec<usize>,
    pub converged: bool,
}

/// Behaviour cloning on the given trajectory files (or directories of them),
/// followed by `dagger_rounds` rounds of DAgger on the same transformations.
pub fn train(
    cfg: &RunConfig,
    demos: &[PathBuf],
    dagger_rounds: usize,
    out: &Path,
    log: &mut dyn Write,
) -> Result<TrainOutcome> {
    let files = collect_trajectory_files(demos)?;
    let trajs: Vec<Trajectory> = files.iter().map(|f| read_trajectory(f)).collect::<Result<_, _>>()?;
    let data = Dataset::from_trajectories(&trajs);
    writeln!(log, "loaded {} trajectories, {} state-action pairs", trajs.len(), data.len())?;
    let hyper = cfg.train_hyper();
    let mut net = train_bc(&data, cfg.grasper.leaky_slope, &hyper)?;
    let mut sizes = vec![data.len()];
    if dagger_rounds > 0 {
        let sim = sim_for(cfg)?;
        let tasks: Vec<Task> =
            trajs.iter().map(|t| Task { spec: t.spec, object: t.object, seed: t.seed }).collect();
        let run = run_dagger(&sim, net, data, &tasks, dagger_rounds, &cfg.episode_options(), &hyper)?;
        for (k, n) in run.sizes.iter().enumerate().skip(1) {
            writeln!(log, "dagger round {k}: beta {} dataset size {n}", beta_schedule(k))?;
        }
        sizes = run.sizes;
        net = run.net;
    }
    let initial = net.meta.initial_loss.unwrap_or(f64::NAN);
    let bc_final = net.meta.loss_curve[hyper.epochs - 1];
    let final_loss = *net.meta.loss_curve.last().expect("at least one epoch");
    let converged = bc_final * CONVERGENCE_FACTOR <= initial;

    let weights = out.join("weights.json");
    write_weights(&weights, &net)?;
    let curve: String = std::iter::once("epoch,loss\n".to_string())
        .chain(net.meta.loss_curve.iter().enumerate().map(|(i, l)| format!("{},{l}\n", i + 1)))
        .collect();
    write_atomic(&out.join("loss_curve.csv"), curve.as_bytes())?;
    write_demo_set(&out.join("demoset.json"), &DemoSet::from_trajectories(trajs))?;
    write_manifest(
        out,
        &ArtifactManifest::new(
            "train",
            cfg.seed,
            &cfg.hash(),
            vec!["weights.json".into(), "loss_curve.csv".into(), "demoset.json".into()],
        ),
    )?;
    writeln!(log, "loss {initial:.6} -> {final_loss:.6} ({})", if converged { "converged" } else { "not converged" })?;
    Ok(TrainOutcome { weights, initial_loss: initial, final_loss, dataset_sizes: sizes, converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Handcrafted,
    Learned,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Handcrafted => "handcrafted",
            PolicyKind::Learned => "learned",
        }
    }
}

/// Runs the selected suites for each policy; writes `report.csv` (one row
/// per trial) and `summary.csv`.
pub fn eval(
    cfg: &RunConfig,
    policies: &[PolicyKind],
    suites: &[SuiteName],
    weights: Option<&Path>,
    out: &Path,
    log: &mut dyn Write,
) -> Result<Vec<(String, SuiteResult)>> {
    let net = if policies.contains(&PolicyKind::Learned) {
        let Some(w) = weights else { bail!("the learned policy needs --weights") };
        Some(read_weights(w)?)
    } else {
        None
    };
    let sim = sim_for(cfg)?;
    let opts = cfg.episode_options();
    let mut results = Vec::new();
    for &kind in policies {
        for &suite in suites {
            let spec = SuiteSpec::default_for(suite, cfg.object, cfg.trials, cfg.seed);
            let grasper = cfg.grasper.clone();
            let mut make: Box<dyn FnMut() -> Box<dyn Policy>> = match kind {
                PolicyKind::Handcrafted => Box::new(move || Box::new(HandcraftedPolicy::new(grasper.clone()))),
                PolicyKind::Learned => {
                    let net = net.clone().expect("loaded above");
                    Box::new(move || Box::new(LearnedPolicy::new(net.clone())))
                }
            };
            let r = run_suite(&sim, &spec, make.as_mut(), &opts);
            writeln!(
                log,
                "{} {}: mean e_omega {:.3} ± {:.3}, drops {}",
                kind.as_str(),
                suite.as_str(),
                r.mean,
                r.std,
                r.drop_count
            )?;
            results.push((kind.as_str().to_string(), r));
        }
    }
    let rows: Vec<_> = results.iter().flat_map(|(p, r)| report_records(p, r)).collect();
    write_atomic(&out.join("report.csv"), report_to_csv(&rows).as_bytes())?;
    let table = compare_report(&results)?;
    write_atomic(&out.join("summary.csv"), summary_to_csv(&table, &results).as_bytes())?;
    write_manifest(
        out,
        &ArtifactManifest::new("eval", cfg.seed, &cfg.hash(), vec!["report.csv".into(), "summary.csv".into()]),
    )?;
    Ok(results)
}

/// Tab-separated per-step trace of a trajectory file.
pub fn replay(path: &Path, log: &mut dyn Write) -> Result<()> {
    let t = read_trajectory(path).with_context(|| format!("replaying {}", path.display()))?;
    let aa = t.spec.target.orientation.to_angle_axis();
    writeln!(
        log,
        "# seed={} steps={} target_axis={} {} {} target_angle_rad={}",
        t.seed,
        t.steps.len(),
        aa.axis.x,
        aa.axis.y,
        aa.axis.z,
        aa.angle
    )?;
    let joints: Vec<String> = (0..9).map(|j| format!("target_{j}")).collect();
    writeln!(log, "step\te_omega\t{}\tresidual_0\tresidual_1\tresidual_2", joints.join("\t"))?;
    if t.steps.is_empty() {
        return Ok(());
    }
    for s in &t.steps {
        let a: Vec<String> = s.action.iter().map(|v| v.to_string()).collect();
        let r: Vec<String> = s.residuals.iter().map(|v| v.to_string()).collect();
        writeln!(log, "{}\t{}\t{}\t{}", s.step, s.e_omega, a.join("\t"), r.join("\t"))?;
    }
    writeln!(log, "reason={} final_e_omega={}", t.termination.as_str(), t.final_e_omega)?;
    Ok(())
}
