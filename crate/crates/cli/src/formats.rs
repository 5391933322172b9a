//! On-disk formats. Every writer goes through `write_atomic`; every reader
//! reproduces the written value exactly.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use rollergrasp_core::config::ObjectModel;
use rollergrasp_core::controller::TargetSpec;
use rollergrasp_core::episode::{Termination, Trajectory, TrajectoryStep};
use rollergrasp_core::eval::{ReportTable, SuiteName, SuiteResult};
use rollergrasp_core::geometry::Vec3;
use rollergrasp_core::learner::graph::DemoSet;
use rollergrasp_core::learner::net::{Layer, Mlp};
use rollergrasp_core::learner::policy::{NetMetadata, PolicyNet};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: corrupt record at line {line} (byte offset {offset}): {msg}")]
    Corrupt { path: PathBuf, line: usize, offset: usize, msg: String },
    #[error("{path}: truncated at byte offset {offset}: expected {expected} steps, found {found}")]
    Truncated { path: PathBuf, offset: usize, expected: usize, found: usize },
    #[error("{path}: {msg}")]
    Invalid { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

fn read(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

// ---------------------------------------------------------------- trajectory

/// First line of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryHeader {
    pub spec: TargetSpec,
    pub seed: u64,
    pub object: ObjectModel,
    pub termination: Termination,
    pub final_e_omega: f64,
    pub steps: usize,
}

pub fn trajectory_to_jsonl(t: &Trajectory) -> String {
    let header = TrajectoryHeader {
        spec: t.spec,
        seed: t.seed,
        object: t.object,
        termination: t.termination,
        final_e_omega: t.final_e_omega,
        steps: t.steps.len(),
    };
    let mut out = serde_json::to_string(&header).expect("header serialises");
    out.push('\n');
    for s in &t.steps {
        out.push_str(&serde_json::to_string(s).expect("step serialises"));
        out.push('\n');
    }
    out
}

pub fn trajectory_from_jsonl(text: &str, path: &Path) -> Result<Trajectory, FormatError> {
    let corrupt = |line: usize, offset: usize, msg: String| FormatError::Corrupt {
        path: path.to_path_buf(),
        line,
        offset,
        msg,
    };
    let mut offset = 0;
    let mut header: Option<TrajectoryHeader> = None;
    let mut steps: Vec<TrajectoryStep> = Vec::new();
    for (i, raw) in text.split_inclusive('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\n').ok_or_else(|| corrupt(line_no, offset, "record not terminated".into()))?;
        if header.is_none() {
            header = Some(serde_json::from_str(line).map_err(|e| corrupt(line_no, offset, e.to_string()))?);
        } else {
            steps.push(serde_json::from_str(line).map_err(|e| corrupt(line_no, offset, e.to_string()))?);
        }
        offset += raw.len();
    }
    let header = header.ok_or_else(|| corrupt(1, 0, "missing header".into()))?;
    if steps.len() != header.steps {
        return Err(FormatError::Truncated {
            path: path.to_path_buf(),
            offset,
            expected: header.steps,
            found: steps.len(),
        });
    }
    Ok(Trajectory {
        spec: header.spec,
        object: header.object,
        seed: header.seed,
        termination: header.termination,
        final_e_omega: header.final_e_omega,
        steps,
    })
}

pub fn write_trajectory(path: &Path, t: &Trajectory) -> Result<(), FormatError> {
    write_atomic(path, trajectory_to_jsonl(t).as_bytes())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, FormatError> {
    trajectory_from_jsonl(&read(path)?, path)
}

/// Trajectory files named directly, or found (sorted) in named directories.
pub fn collect_trajectory_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, FormatError> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(io_err(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            files.extend(found);
        } else if p.exists() {
            files.push(p.clone());
        } else {
            return Err(FormatError::Io {
                path: p.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
            });
        }
    }
    Ok(files)
}

// ------------------------------------------------------------------- weights

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    /// Row-major: one inner array per output unit.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsFile {
    pub metadata: NetMetadata,
    pub layers: Vec<LayerRecord>,
}

impl WeightsFile {
    pub fn from_net(net: &PolicyNet) -> Self {
        let layers = net
            .mlp
            .layers
            .iter()
            .map(|l| LayerRecord {
                weights: l.w.row_iter().map(|r| r.iter().copied().collect()).collect(),
                biases: l.b.iter().copied().collect(),
            })
            .collect();
        Self { metadata: net.meta.clone(), layers }
    }

    pub fn into_net(self) -> Result<PolicyNet, String> {
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut fan_in = *self.metadata.arch.first().ok_or("empty arch")?;
        for (i, l) in self.layers.into_iter().enumerate() {
            let rows = l.weights.len();
            if l.biases.len() != rows || l.weights.iter().any(|r| r.len() != fan_in) {
                return Err(format!("layer {i} does not match a {fan_in}-input layer"));
            }
            if self.metadata.arch.get(i + 1) != Some(&rows) {
                return Err(format!("layer {i} width {rows} disagrees with arch"));
            }
            let w = DMatrix::from_row_iterator(rows, fan_in, l.weights.into_iter().flatten());
            layers.push(Layer { w, b: DVector::from_vec(l.biases) });
            fan_in = rows;
        }
        if layers.len() + 1 != self.metadata.arch.len() {
            return Err("layer count disagrees with arch".into());
        }
        let mlp = Mlp { layers, leaky_slope: self.metadata.leaky_slope };
        if !mlp.is_finite() {
            return Err("non-finite weight".into());
        }
        Ok(PolicyNet { mlp, meta: self.metadata })
    }
}

pub fn write_weights(path: &Path, net: &PolicyNet) -> Result<(), FormatError> {
    let text = serde_json::to_string(&WeightsFile::from_net(net)).expect("weights serialise");
    write_atomic(path, text.as_bytes())
}

pub fn read_weights(path: &Path) -> Result<PolicyNet, FormatError> {
    let text = read(path)?;
    let file: WeightsFile = serde_json::from_str(&text).map_err(|e| FormatError::Corrupt {
        path: path.to_path_buf(),
        line: e.line(),
        offset: 0,
        msg: e.to_string(),
    })?;
    file.into_net().map_err(|msg| FormatError::Invalid { path: path.to_path_buf(), msg })
}

// ------------------------------------------------------------------ demo set

pub fn write_demo_set(path: &Path, d: &DemoSet) -> Result<(), FormatError> {
    write_atomic(path, serde_json::to_string(d).expect("demo set serialises").as_bytes())
}

pub fn read_demo_set(path: &Path) -> Result<DemoSet, FormatError> {
    let text = read(path)?;
    let d: DemoSet = serde_json::from_str(&text).map_err(|e| FormatError::Corrupt {
        path: path.to_path_buf(),
        line: e.line(),
        offset: 0,
        msg: e.to_string(),
    })?;
    if d.edges.iter().any(|e| e.trajectory >= d.trajectories.len() || e.from >= d.nodes.len() || e.to >= d.nodes.len()) {
        return Err(FormatError::Invalid { path: path.to_path_buf(), msg: "edge references a missing entry".into() });
    }
    Ok(d)
}

// -------------------------------------------------------------------- report

pub const REPORT_COLUMNS: [&str; 8] =
    ["suite", "case_axis", "angle_deg", "policy", "trial", "final_e_omega", "steps", "reason"];

/// One row per (suite, case, trial).
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRecord {
    pub suite: SuiteName,
    pub case_axis: Vec3,
    pub angle_deg: f64,
    pub policy: String,
    pub trial: usize,
    pub final_e_omega: f64,
    pub steps: usize,
    pub reason: Termination,
}

pub fn report_records(policy: &str, result: &SuiteResult) -> Vec<ReportRecord> {
    result
        .cases
        .iter()
        .flat_map(|c| {
            c.trials.iter().enumerate().map(move |(i, t)| ReportRecord {
                suite: result.name,
                case_axis: c.case.axis,
                angle_deg: c.case.angle_rad.to_degrees(),
                policy: policy.to_string(),
                trial: i,
                final_e_omega: t.final_e_omega,
                steps: t.steps,
                reason: t.termination,
            })
        })
        .collect()
}

fn axis_field(v: Vec3) -> String {
    format!("{} {} {}", v.x, v.y, v.z)
}

pub fn report_to_csv(rows: &[ReportRecord]) -> String {
    let mut out = REPORT_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.suite.as_str(),
            axis_field(r.case_axis),
            r.angle_deg,
            r.policy,
            r.trial,
            r.final_e_omega,
            r.steps,
            r.reason.as_str()
        ));
    }
    out
}

fn parse_termination(s: &str) -> Option<Termination> {
    [Termination::Converged, Termination::Budget, Termination::Dropped].into_iter().find(|t| t.as_str() == s)
}

pub fn report_from_csv(text: &str, path: &Path) -> Result<Vec<ReportRecord>, FormatError> {
    let mut lines = text.lines();
    let corrupt = |line: usize, msg: String| FormatError::Corrupt { path: path.to_path_buf(), line, offset: 0, msg };
    if lines.next() != Some(REPORT_COLUMNS.join(",").as_str()) {
        return Err(corrupt(1, "unexpected header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let n = i + 2;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != REPORT_COLUMNS.len() {
                return Err(corrupt(n, format!("expected {} fields", REPORT_COLUMNS.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| corrupt(n, e.to_string()));
            let int = |s: &str| s.parse::<usize>().map_err(|e| corrupt(n, e.to_string()));
            let axis: Vec<f64> = f[1].split(' ').map(num).collect::<Result<_, _>>()?;
            if axis.len() != 3 {
                return Err(corrupt(n, "case_axis needs three components".into()));
            }
            Ok(ReportRecord {
                suite: f[0].parse().map_err(|e: String| corrupt(n, e))?,
                case_axis: Vec3::new(axis[0], axis[1], axis[2]),
                angle_deg: num(f[2])?,
                policy: f[3].to_string(),
                trial: int(f[4])?,
                final_e_omega: num(f[5])?,
                steps: int(f[6])?,
                reason: parse_termination(f[7]).ok_or_else(|| corrupt(n, format!("unknown reason `{}`", f[7])))?,
            })
        })
        .collect()
}

/// Side-by-side table: one row per case, then mean, std and drop rows per
/// suite, and a Δmean row when two policies are compared.
pub fn summary_to_csv(table: &ReportTable, results: &[(String, SuiteResult)]) -> String {
    let mut out = format!("suite,row,{}\n", table.policies.join(","));
    let join = |xs: Vec<String>| xs.join(",");
    for footer in &table.footers {
        let suite = footer.suite.as_str();
        for row in table.rows.iter().filter(|r| r.suite == footer.suite) {
            out.push_str(&format!(
                "{suite},{},{}\n",
                axis_field(row.axis),
                join(row.cells.iter().map(|c| c.to_string()).collect())
            ));
        }
        out.push_str(&format!("{suite},mean,{}\n", join(footer.stats.iter().map(|s| s.0.to_string()).collect())));
        out.push_str(&format!("{suite},std,{}\n", join(footer.stats.iter().map(|s| s.1.to_string()).collect())));
        let drops = table
            .policies
            .iter()
            .map(|p| {
                results
                    .iter()
                    .find(|(q, r)| q == p && r.name == footer.suite)
                    .map_or(String::new(), |(_, r)| r.drop_count.to_string())
            })
            .collect();
        out.push_str(&format!("{suite},drops,{}\n", join(drops)));
        if let Some(d) = footer.delta_mean {
            out.push_str(&format!("{suite},delta_mean,{d}\n"));
        }
    }
    out
}

// ------------------------------------------------------------------ manifest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactManifest {
    pub run_id: String,
    pub config_hash: String,
    /// Paths relative to the manifest's directory.
    pub files: Vec<String>,
    pub versions: std::collections::BTreeMap<String, String>,
}

impl ArtifactManifest {
    pub fn new(command: &str, seed: u64, config_hash: &str, files: Vec<String>) -> Self {
        let mut versions = std::collections::BTreeMap::new();
        versions.insert("rollergrasp".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self { run_id: format!("{command}-{seed}-{}", &config_hash[..12]), config_hash: config_hash.into(), files, versions }
    }
}

/// Writes `manifest.json` into `dir` after checking every listed file exists.
pub fn write_manifest(dir: &Path, m: &ArtifactManifest) -> Result<PathBuf, FormatError> {
    for f in &m.files {
        let p = dir.join(f);
        if !p.is_file() {
            return Err(FormatError::Invalid { path: p, msg: "manifest lists a missing file".into() });
        }
    }
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(m).expect("manifest serialises");
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<ArtifactManifest, FormatError> {
    serde_json::from_str(&read(path)?).map_err(|e| FormatError::Corrupt {
        path: path.to_path_buf(),
        line: e.line(),
        offset: 0,
        msg: e.to_string(),
    })
}
