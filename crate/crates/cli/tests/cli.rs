use std::path::{Path, PathBuf};
use std::process::Command;

use rollergrasp_cli::commands::{self, PolicyKind};
use rollergrasp_cli::config::RunConfig;
use rollergrasp_cli::formats::{read_manifest, read_trajectory, report_from_csv, write_trajectory};
use rollergrasp_core::episode::Termination;
use rollergrasp_core::eval::SuiteName;

fn config(json: &str) -> RunConfig {
    RunConfig::from_json(json, Path::new("test.json")).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rollergrasp"))
}

fn sorted_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn gen_expert_writes_one_file_per_spec_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(r#"{"expert": {"count": 2}, "seed": 4}"#);
    let mut log = Vec::new();
    let files = commands::gen_expert(&cfg, &dir.path().join("a"), &mut log).unwrap();
    assert_eq!(files.len(), 2);
    assert!(String::from_utf8(log).unwrap().contains("success rate"));
    let m = read_manifest(&dir.path().join("a/manifest.json")).unwrap();
    assert_eq!(m.files, ["traj_0000.jsonl", "traj_0001.jsonl"]);
    assert_eq!(m.config_hash, cfg.hash());

    commands::gen_expert(&cfg, &dir.path().join("b"), &mut Vec::new()).unwrap();
    assert_eq!(sorted_files(&dir.path().join("a")), sorted_files(&dir.path().join("b")));

    let other = config(r#"{"expert": {"count": 2}, "seed": 5}"#);
    commands::gen_expert(&other, &dir.path().join("c"), &mut Vec::new()).unwrap();
    assert_ne!(sorted_files(&dir.path().join("a")), sorted_files(&dir.path().join("c")));
}

#[test]
fn train_records_curve_and_aggregates_across_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(r#"{"expert": {"count": 3}, "learner": {"epochs": 15}, "episode": {"max_steps": 80}}"#);
    commands::gen_expert(&cfg, &dir.path().join("demos"), &mut Vec::new()).unwrap();
    let mut log = Vec::new();
    let outcome =
        commands::train(&cfg, &[dir.path().join("demos")], 3, &dir.path().join("model"), &mut log).unwrap();
    let log = String::from_utf8(log).unwrap();

    // One line per epoch of BC and of every DAgger retraining.
    let curve = std::fs::read_to_string(dir.path().join("model/loss_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 4 * 15);

    let logged: Vec<usize> = log
        .lines()
        .filter_map(|l| l.strip_prefix("dagger round "))
        .map(|l| l.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(logged.len(), 3);
    assert_eq!(logged, outcome.dataset_sizes[1..]);
    assert!(outcome.dataset_sizes.windows(2).all(|w| w[0] < w[1]), "{:?}", outcome.dataset_sizes);
    assert!(outcome.final_loss < outcome.initial_loss);
    assert!(dir.path().join("model/weights.json").is_file());
    assert!(dir.path().join("model/demoset.json").is_file());
}

#[test]
fn train_with_missing_demo_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.jsonl");
    let err = commands::train(&RunConfig::default(), &[missing.clone()], 0, dir.path(), &mut Vec::new()).unwrap_err();
    assert!(format!("{err:#}").contains(missing.to_str().unwrap()), "{err:#}");
}

#[test]
fn train_on_empty_directory_is_an_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let err = commands::train(&RunConfig::default(), &[dir.path().to_path_buf()], 0, dir.path(), &mut Vec::new())
        .unwrap_err();
    assert!(format!("{err:#}").to_lowercase().contains("empty"), "{err:#}");
}

#[test]
fn handcrafted_s_suite_has_25_rows_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();
    for sub in ["a", "b"] {
        commands::eval(&cfg, &[PolicyKind::Handcrafted], &[SuiteName::S], None, &dir.path().join(sub), &mut Vec::new())
            .unwrap();
    }
    let path = dir.path().join("a/report.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let rows = report_from_csv(&text, &path).unwrap();
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().all(|r| r.policy == "handcrafted" && r.suite == SuiteName::S));
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(dir.path().join("b/report.csv")).unwrap());
    let summary = std::fs::read_to_string(dir.path().join("a/summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("S,mean,")));
}

#[test]
fn learned_eval_without_weights_fails() {
    let dir = tempfile::tempdir().unwrap();
    let err = commands::eval(&RunConfig::default(), &[PolicyKind::Learned], &[SuiteName::S], None, dir.path(), &mut Vec::new())
        .unwrap_err();
    assert!(err.to_string().contains("--weights"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

fn replay_lines(path: &Path) -> Vec<String> {
    let mut out = Vec::new();
    commands::replay(path, &mut out).unwrap();
    String::from_utf8(out).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn replay_traces_steps_and_reason() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(r#"{"expert": {"count": 1}, "object": {"shape": {"kind": "sphere", "radius_mm": 30.0}, "mass_g": 0.0}}"#);
    let files = commands::gen_expert(&cfg, dir.path(), &mut Vec::new()).unwrap();
    let t = read_trajectory(&files[0]).unwrap();
    assert_eq!(t.termination, Termination::Converged);
    let lines = replay_lines(&files[0]);
    assert_eq!(lines.len(), 2 + t.steps.len() + 1);
    assert!(lines[1].starts_with("step\te_omega\ttarget_0"));
    assert_eq!(lines[2].split('\t').count(), 2 + 9 + 3);
    assert!(lines.last().unwrap().starts_with("reason=converged "));

    let mut empty = t.clone();
    empty.steps.clear();
    let p = dir.path().join("empty.jsonl");
    write_trajectory(&p, &empty).unwrap();
    assert_eq!(replay_lines(&p).len(), 2);
}

#[test]
fn replay_of_truncated_file_reports_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    let files = commands::gen_expert(&config(r#"{"expert": {"count": 1}}"#), dir.path(), &mut Vec::new()).unwrap();
    let text = std::fs::read_to_string(&files[0]).unwrap();
    let keep: String = text.split_inclusive('\n').take(4).collect();
    std::fs::write(&files[0], &keep).unwrap();
    let err = commands::replay(&files[0], &mut Vec::new()).unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains(&format!("byte offset {}", keep.len())), "{msg}");
}

#[test]
fn binary_reports_config_errors_with_field_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"grasper": {"lambda": 0.0}}"#).unwrap();
    let out = bin().arg("--config").arg(&cfg).arg("gen-expert").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("grasper.lambda"));

    std::fs::write(&cfg, "{\n  \"seed\": [1]\n}").unwrap();
    let out = bin().arg("--config").arg(&cfg).arg("gen-expert").output().unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.json:2:"), "{stderr}");

    let out = bin().arg("--config").arg(dir.path().join("absent.json")).arg("gen-expert").output().unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
}

#[test]
fn binary_eval_honours_out_seed_and_trials() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = bin()
            .args(["--seed", "9", "eval", "--policy", "handcrafted", "--suite", "S", "--trials", "1", "--out"])
            .arg(dir.path().join(sub))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.path().join(sub).join("report.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(String::from_utf8_lossy(&a).lines().count(), 1 + 5);
    assert_eq!(a, run("b"));
    let m = read_manifest(&dir.path().join("a/manifest.json")).unwrap();
    assert!(m.run_id.starts_with("eval-9-"));

    let out = bin().args(["eval", "--policy", "learned"]).current_dir(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--weights"));
}
