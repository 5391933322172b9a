//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p rollergrasp-cli --test acceptance`. The learning
//! criteria share one behaviour-cloned network, so they run in order.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rollergrasp_cli::commands::{self, PolicyKind};
use rollergrasp_cli::config::RunConfig;
use rollergrasp_cli::formats::{
    read_demo_set, read_manifest, read_trajectory, read_weights, report_from_csv, report_to_csv,
    write_demo_set, write_manifest, write_trajectory, write_weights,
};
use rollergrasp_core::config::{GrasperConfig, ObjectModel};
use rollergrasp_core::controller::TargetSpec;
use rollergrasp_core::episode::{
    rollout, EpisodeOptions, HandcraftedPolicy, Policy, Termination, STOP_THRESHOLD,
};
use rollergrasp_core::eval::{mean_std, orientation_error, run_suite, SuiteName, SuiteSpec, GRASP_CENTER};
use rollergrasp_core::geometry::{Pose, UnitQuat, Vec3};
use rollergrasp_core::kinematics::{decompose_contact_motion, forward_finger, pivot_angle_for, sphere_contact};
use rollergrasp_core::learner::dagger::{expert_trajectories, run_dagger, s_suite_tasks, z_dominant_tasks, Task};
use rollergrasp_core::learner::graph::DemoSet;
use rollergrasp_core::learner::net::{gradient_check, Mlp, POLICY_ARCH};
use rollergrasp_core::learner::policy::{LearnedPolicy, PolicyNet};
use rollergrasp_core::learner::train::{train_bc, Dataset, TrainHyper};
use rollergrasp_core::sim::{solve_object_twist, RollingConstraint, Sim, SimParams};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit(r: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        if let Some(u) = v.try_normalize(0.1) {
            if v.norm() <= 1.0 {
                return u;
            }
        }
    }
}

fn random_quat(r: &mut ChaCha8Rng) -> UnitQuat {
    UnitQuat::from_axis_angle(unit(r), r.gen_range(0.0..std::f64::consts::TAU)).unwrap()
}

fn angle_between_lines(a: Vec3, b: Vec3) -> f64 {
    let c = a.cross(b).norm();
    c.atan2(a.dot(b).abs())
}

// ---------------------------------------------------------------------------

fn decomposition_identity() -> Verdict {
    let mut r = rng(1);
    let t0 = Instant::now();
    let (mut worst_sum, mut worst_perp, mut n, mut skipped) = (0.0f64, 0.0f64, 0, 0);
    while n < 1000 {
        let dx = unit(&mut r) * r.gen_range(0.01..5.0);
        let zcb = unit(&mut r);
        let normal = unit(&mut r);
        // Non-degenerate: displacement and normal well away from ẑ_cb.
        if zcb.cross(dx).norm() < 0.05 * dx.norm() || zcb.cross(normal).norm() < 0.05 {
            skipped += 1;
            continue;
        }
        let d = decompose_contact_motion(dx, zcb, normal);
        if d.degenerate {
            skipped += 1;
            continue;
        }
        worst_sum = worst_sum.max((zcb * d.alpha + d.z_cr_hat * d.beta - dx).norm());
        worst_perp = worst_perp.max(d.z_cr_hat.dot(normal).abs());
        n += 1;
    }
    let elapsed = t0.elapsed();
    verdict(
        worst_sum <= 1e-9 && worst_perp <= 1e-9 && elapsed < Duration::from_secs(1),
        format!(
            "{n} triples ({skipped} degenerate draws skipped): max |αẑ_cb+βẑ_cr−δx| {worst_sum:.2e}, \
             max |ẑ_cr·n| {worst_perp:.2e}, {elapsed:.2?}"
        ),
    )
}

fn pivot_alignment_closure() -> Verdict {
    let cfg = GrasperConfig::default();
    let mut r = rng(2);
    let (mut worst, mut sign_ok, mut n, mut skipped) = (0.0f64, true, 0, 0);
    while n < 1000 {
        let finger = r.gen_range(0..3);
        let theta1 = r.gen_range(-0.6..0.6);
        let fr = forward_finger(&cfg, finger, theta1, 0.0).unwrap();
        let x_obj = GRASP_CENTER + unit(&mut r) * r.gen_range(0.0..20.0);
        let contact = sphere_contact(&fr, cfg.roller_radius_mm, r.gen_range(20.0..45.0), x_obj).unwrap();
        let zcb = fr.base_axis.cross(contact.point - fr.base_origin).try_normalize(1e-9).unwrap();
        let d = decompose_contact_motion(unit(&mut r) * r.gen_range(0.1..3.0), zcb, contact.normal);
        let Ok(theta2) = pivot_angle_for(fr.finger_axis, fr.pivot_axis, d.z_cr_hat, fr.vertical) else {
            skipped += 1;
            continue;
        };
        let z3 = forward_finger(&cfg, finger, theta1, theta2).unwrap().roller_axis;
        let surface = z3.cross(contact.normal);
        // Contacts at the roller pole have no rolling direction at all.
        if d.degenerate || surface.norm() < 1e-3 {
            skipped += 1;
            continue;
        }
        worst = worst.max(angle_between_lines(surface, d.z_cr_hat));
        sign_ok &= z3.dot(fr.vertical) >= -1e-12;
        n += 1;
    }
    verdict(
        worst <= 1e-6 && sign_ok,
        format!("{n} cases ({skipped} skipped): max angular error {worst:.2e} rad, Z3·Z0 ≥ 0: {sign_ok}"),
    )
}

fn metric_conformance() -> Verdict {
    let id = UnitQuat::IDENTITY;
    let q = UnitQuat::new(0.3, 0.5, -0.1, 0.8).unwrap();
    let x180 = UnitQuat::new(0.0, 1.0, 0.0, 0.0).unwrap();
    let z90 = UnitQuat::from_axis_angle(Vec3::Z, std::f64::consts::FRAC_PI_2).unwrap();
    let cases = [
        (orientation_error(q, q), 0.0),
        (orientation_error(q, q.negated()), 0.0),
        (orientation_error(id, x180), 100.0),
        (orientation_error(id, z90), 54.119_610_014_619_7),
    ];
    let ref_ok = cases.iter().all(|(got, want)| (got - want).abs() <= 1e-6);
    let mut r = rng(3);
    let mut props_ok = true;
    for _ in 0..10_000 {
        let a = random_quat(&mut r);
        let b = random_quat(&mut r);
        let e = orientation_error(a, b);
        props_ok &= (0.0..=100.0 + 1e-12).contains(&e)
            && e == orientation_error(a, b.negated())
            && e == orientation_error(a.negated(), b)
            && e == orientation_error(b, a);
    }
    let got: Vec<String> = cases.iter().map(|(g, _)| format!("{g:.6}")).collect();
    verdict(
        ref_ok && props_ok,
        format!("reference values [{}]; bounds/sign/symmetry on 10^4 pairs: {props_ok}", got.join(", ")),
    )
}

// Normal equations solved by Gaussian elimination with partial pivoting —
// deliberately a different route from the library's SVD.
fn twist_oracle(cs: &[RollingConstraint], x: Vec3) -> [f64; 6] {
    let mut m = [[0.0f64; 7]; 6];
    for c in cs {
        let d = c.point - x;
        let rows = [
            ([1.0, 0.0, 0.0, 0.0, d.z, -d.y], c.surface_displacement.x),
            ([0.0, 1.0, 0.0, -d.z, 0.0, d.x], c.surface_displacement.y),
            ([0.0, 0.0, 1.0, d.y, -d.x, 0.0], c.surface_displacement.z),
        ];
        for (a, b) in rows {
            for i in 0..6 {
                for j in 0..6 {
                    m[i][j] += a[i] * a[j];
                }
                m[i][6] += a[i] * b;
            }
        }
    }
    for col in 0..6 {
        let p = (col..6).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, p);
        for row in 0..6 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..7 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    std::array::from_fn(|i| m[i][6] / m[i][i])
}

fn twist_solve_oracle() -> Verdict {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = GRASP_CENTER + unit(&mut r) * 5.0;
        let cs: Vec<RollingConstraint> = (0..3)
            .map(|finger| RollingConstraint {
                finger,
                point: x + unit(&mut r) * r.gen_range(25.0..45.0),
                surface_displacement: unit(&mut r) * r.gen_range(0.0..2.0),
            })
            .collect();
        let got = solve_object_twist(&cs, x);
        let want = twist_oracle(&cs, x);
        let got = [got.v.x, got.v.y, got.v.z, got.omega.x, got.omega.y, got.omega.z];
        for i in 0..6 {
            worst = worst.max((got[i] - want[i]).abs());
        }
    }
    // Consistent yaw: every contact moves exactly as a rigid rotation about ẑ.
    let mut worst_res = 0.0f64;
    let mut worst_yaw = 0.0f64;
    for _ in 0..100 {
        let x = GRASP_CENTER;
        let w = Vec3::Z * r.gen_range(-0.05..0.05);
        let cs: Vec<RollingConstraint> = (0..3)
            .map(|finger| {
                let p = x + unit(&mut r) * 51.5;
                RollingConstraint { finger, point: p, surface_displacement: w.cross(p - x) }
            })
            .collect();
        let s = solve_object_twist(&cs, x);
        worst_res = s.slip_residual_per_contact.iter().fold(worst_res, |m, v| m.max(*v));
        worst_yaw = worst_yaw.max((s.omega - w).norm()).max(s.v.norm());
    }
    verdict(
        worst <= 1e-6 && worst_res <= 1e-9 && worst_yaw <= 1e-9,
        format!(
            "100 random configs: max |Δtwist| {worst:.2e}; consistent yaw: max residual {worst_res:.2e}, \
             twist error {worst_yaw:.2e}"
        ),
    )
}

fn yaw_spec() -> TargetSpec {
    let start = Pose::from_position(GRASP_CENTER);
    let q = UnitQuat::from_axis_angle(Vec3::Z, std::f64::consts::FRAC_PI_2).unwrap();
    TargetSpec { start, target: Pose::new(GRASP_CENTER, q) }
}

fn handcrafted_closed_loop() -> Verdict {
    let sim = Sim::new(GrasperConfig::default(), SimParams::noiseless()).unwrap();
    let opts = EpisodeOptions { max_steps: 3000, stop_threshold: Some(STOP_THRESHOLD) };
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, object, bound) in [("sphere R30", ObjectModel::sphere(30.0), 5.0), ("cube 60", ObjectModel::cube60(), 10.0)] {
        let t0 = Instant::now();
        let run = || rollout(&sim, object, &yaw_spec(), 7, &mut HandcraftedPolicy::new(sim.config.clone()), None, &opts);
        let a = run().unwrap();
        let elapsed = t0.elapsed();
        let deterministic = run().unwrap() == a;
        let ok = a.final_e_omega < bound
            && a.termination != Termination::Dropped
            && a.steps.len() <= 3000
            && deterministic
            && elapsed < Duration::from_secs(10);
        pass &= ok;
        parts.push(format!(
            "{name}: e_ω {:.3} (< {bound}) in {} steps, {}, deterministic {deterministic}, {elapsed:.2?}",
            a.final_e_omega,
            a.steps.len(),
            a.termination.as_str()
        ));
    }
    verdict(pass, parts.join("; "))
}

fn gradient_check_policy_arch() -> Verdict {
    let net = Mlp::init(&POLICY_ARCH, 0.01, 6);
    let mut r = rng(6);
    let x = DMatrix::from_fn(POLICY_ARCH[0], 8, |_, _| r.gen_range(-1.0..1.0));
    let t = DMatrix::from_fn(*POLICY_ARCH.last().unwrap(), 8, |_, _| r.gen_range(-1.0..1.0));
    let g = gradient_check(&net, &x, &t, 100, 6);
    verdict(
        g.checked == 100 && g.max_rel_error <= 1e-4,
        format!(
            "arch {:?}: {} coordinates, max relative error {:.2e}, {} kink draws excluded",
            POLICY_ARCH, g.checked, g.max_rel_error, g.skipped_kinks
        ),
    )
}

// ---------------------------------------------------------------------------
// Learning criteria: cube, sensor noise on, 50 expert demonstrations.

const LEARN_SEED: u64 = 1;
const HELD_OUT_SEED: u64 = 99;
const SUITE_SEED: u64 = 2024;

struct Learning {
    sim: Sim,
    opts: EpisodeOptions,
    tasks: Vec<Task>,
    data: Dataset,
    hyper: TrainHyper,
    bc: PolicyNet,
}

fn score(sim: &Sim, net: &PolicyNet, tasks: &[Task], opts: &EpisodeOptions) -> (Vec<f64>, usize) {
    let mut errs = Vec::with_capacity(tasks.len());
    let mut drops = 0;
    for t in tasks {
        let mut p = LearnedPolicy::new(net.clone());
        match rollout(sim, t.object, &t.spec, t.seed, &mut p, None, opts) {
            Ok(tr) if tr.termination != Termination::Dropped => errs.push(tr.final_e_omega),
            _ => {
                drops += 1;
                errs.push(100.0);
            }
        }
    }
    (errs, drops)
}

fn behaviour_cloning() -> (Verdict, Learning) {
    let t0 = Instant::now();
    let object = ObjectModel::cube60();
    let sim = Sim::new(GrasperConfig::default(), SimParams::default()).unwrap();
    let opts = EpisodeOptions { max_steps: 300, stop_threshold: Some(STOP_THRESHOLD) };
    let tasks = s_suite_tasks(50, object, LEARN_SEED);
    let trajs = expert_trajectories(&sim, &tasks, &opts).unwrap();
    let data = Dataset::from_trajectories(&trajs);
    let hyper = TrainHyper { seed: LEARN_SEED, ..TrainHyper::default() };
    let bc = train_bc(&data, sim.config.leaky_slope, &hyper).unwrap();
    let initial = bc.meta.initial_loss.unwrap();
    let last = *bc.meta.loss_curve.last().unwrap();
    let (errs, drops) = score(&sim, &bc, &tasks, &opts);
    let completed = (tasks.len() - drops) as f64 / tasks.len() as f64;
    let (mean, _) = mean_std(&errs);
    let elapsed = t0.elapsed();
    let pass = hyper.epochs <= 200
        && last * 10.0 <= initial
        && completed >= 0.8
        && mean <= 1.5 * STOP_THRESHOLD
        && elapsed < Duration::from_secs(600);
    let v = verdict(
        pass,
        format!(
            "{} pairs; loss {initial:.3} -> {last:.4} ({:.1}x) in {} epochs; trained specs: {:.0}% without drop, \
             mean e_ω {mean:.3} (≤ {}); {elapsed:.1?}",
            data.len(),
            initial / last,
            hyper.epochs,
            completed * 100.0,
            1.5 * STOP_THRESHOLD
        ),
    );
    (v, Learning { sim, opts, tasks, data, hyper, bc })
}

fn dagger_effect(l: &Learning) -> (Verdict, PolicyNet) {
    let held = z_dominant_tasks(20, ObjectModel::cube60(), HELD_OUT_SEED);
    let (bc_errs, bc_drops) = score(&l.sim, &l.bc, &held, &l.opts);
    let run = run_dagger(&l.sim, l.bc.clone(), l.data.clone(), &l.tasks, 3, &l.opts, &l.hyper).unwrap();
    let (dg_errs, dg_drops) = score(&l.sim, &run.net, &held, &l.opts);
    let bc_mean = mean_std(&bc_errs).0;
    let dg_mean = mean_std(&dg_errs).0;
    let monotone = run.sizes.windows(2).all(|w| w[0] < w[1]);
    let v = verdict(
        dg_mean <= 1.1 * bc_mean && monotone && run.sizes.len() == 4,
        format!(
            "held-out mean e_ω: BC {bc_mean:.3} ({bc_drops} drops), DAgger {dg_mean:.3} ({dg_drops} drops), \
             bound {:.3}; dataset sizes {:?}",
            1.1 * bc_mean,
            run.sizes
        ),
    );
    (v, run.net)
}

fn variance_finding(l: &Learning, dagger: &PolicyNet) -> Verdict {
    let suite = SuiteSpec::default_for(SuiteName::S, ObjectModel::cube60(), 5, SUITE_SEED);
    let config = l.sim.config.clone();
    let mut hand = move || Box::new(HandcraftedPolicy::new(config.clone())) as Box<dyn Policy>;
    let h = run_suite(&l.sim, &suite, &mut hand, &l.opts);
    let mut parts = vec![format!("handcrafted {:.3} ± {:.3}", h.mean, h.std)];
    let mut pass = true;
    for (name, net) in [("BC", &l.bc), ("DAgger", dagger)] {
        let mut make = || Box::new(LearnedPolicy::new(net.clone())) as Box<dyn Policy>;
        let r = run_suite(&l.sim, &suite, &mut make, &l.opts);
        pass &= r.std <= h.std;
        parts.push(format!("{name} {:.3} ± {:.3} ({} drops)", r.mean, r.std, r.drop_count));
    }
    verdict(pass, format!("S suite, noise on, 5 seeds/case: {}", parts.join(", ")))
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn determinism_and_round_trip(l: &Learning) -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(r#"{"expert": {"count": 6}, "trials": 2, "seed": 11}"#, Path::new("inline")).unwrap();
    let mut sink = Vec::new();
    let mut same = true;
    for (i, dir) in ["a", "b"].iter().enumerate() {
        let out = tmp.path().join(dir);
        commands::gen_expert(&cfg, &out.join("expert"), &mut sink).unwrap();
        commands::eval(&cfg, &[PolicyKind::Handcrafted], &[SuiteName::S], None, &out.join("eval"), &mut sink).unwrap();
        if i == 1 {
            let a = tmp.path().join("a");
            same = files_in(&a.join("expert")) == files_in(&out.join("expert"))
                && files_in(&a.join("eval")) == files_in(&out.join("eval"));
        }
    }

    let mut round_trips = Vec::new();
    let expert_dir = tmp.path().join("a/expert");
    let t = read_trajectory(&expert_dir.join("traj_0000.jsonl")).unwrap();
    write_trajectory(&tmp.path().join("t.jsonl"), &t).unwrap();
    round_trips.push(("trajectory", read_trajectory(&tmp.path().join("t.jsonl")).unwrap() == t));
    write_weights(&tmp.path().join("w.json"), &l.bc).unwrap();
    round_trips.push(("weights", read_weights(&tmp.path().join("w.json")).unwrap() == l.bc));
    let demos = DemoSet::from_trajectories(vec![t.clone()]);
    write_demo_set(&tmp.path().join("d.json"), &demos).unwrap();
    round_trips.push(("demo set", read_demo_set(&tmp.path().join("d.json")).unwrap() == demos));
    let report_path = tmp.path().join("a/eval/report.csv");
    let text = std::fs::read_to_string(&report_path).unwrap();
    let records = report_from_csv(&text, &report_path).unwrap();
    round_trips.push(("report", report_to_csv(&records) == text));
    let m = read_manifest(&tmp.path().join("a/eval/manifest.json")).unwrap();
    let rewritten = write_manifest(&tmp.path().join("b/eval"), &m).unwrap();
    round_trips.push((
        "manifest",
        read_manifest(&rewritten).unwrap() == m
            && std::fs::read(&rewritten).unwrap() == std::fs::read(tmp.path().join("a/eval/manifest.json")).unwrap(),
    ));
    let cfg_text = serde_json::to_string(&cfg).unwrap();
    round_trips.push(("config", RunConfig::from_json(&cfg_text, Path::new("inline")).unwrap() == cfg));

    let all = round_trips.iter().all(|(_, ok)| *ok);
    let detail: Vec<String> = round_trips.iter().map(|(n, ok)| format!("{n} {ok}")).collect();
    verdict(
        same && all,
        format!("reruns byte-identical: {same}; round-trips: {}", detail.join(", ")),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |n: usize, v: Verdict| {
        if !v.pass {
            failures += 1;
        }
        println!("criterion {n:>2}: {} — {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    };
    report(1, decomposition_identity());
    report(2, pivot_alignment_closure());
    report(3, metric_conformance());
    report(4, twist_solve_oracle());
    report(5, handcrafted_closed_loop());
    report(6, gradient_check_policy_arch());
    let (v7, learning) = behaviour_cloning();
    report(7, v7);
    let (v8, dagger) = dagger_effect(&learning);
    report(8, v8);
    report(9, variance_finding(&learning, &dagger));
    report(10, determinism_and_round_trip(&learning));
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
