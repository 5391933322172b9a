//! Run configuration: one JSON file, units in field names.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use rollergrasp_core::config::{ConfigError, GrasperConfig, ObjectModel};
use rollergrasp_core::episode::{EpisodeOptions, STOP_THRESHOLD};
use rollergrasp_core::eval::SuiteName;
use rollergrasp_core::learner::train::TrainHyper;
use rollergrasp_core::sim::SimParams;

#[derive(Debug, Error)]
pub enum RunConfigError {
    #[error("cannot read config {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {msg}")]
    Parse { path: PathBuf, line: usize, column: usize, msg: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecSet {
    /// Quarter turns cycling through the S-suite axes.
    SSuite,
    /// Quarter turns about random near-vertical axes.
    ZDominant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    pub max_steps: usize,
    pub stop_threshold_e_omega: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { max_steps: 500, stop_threshold_e_omega: STOP_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    pub count: usize,
    pub specs: SpecSet,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self { count: 50, specs: SpecSet::SSuite }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub dagger_rounds: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        let h = TrainHyper::default();
        Self { epochs: h.epochs, batch: h.batch, lr: h.lr, dagger_rounds: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grasper: GrasperConfig,
    pub object: ObjectModel,
    pub sensors: SimParams,
    pub episode: EpisodeConfig,
    pub expert: ExpertConfig,
    pub learner: LearnerConfig,
    pub suites: Vec<SuiteName>,
    pub trials: usize,
    pub seed: u64,
    /// Where artifacts go unless overridden on the command line.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grasper: GrasperConfig::default(),
            object: ObjectModel::cube60(),
            sensors: SimParams::default(),
            episode: EpisodeConfig::default(),
            expert: ExpertConfig::default(),
            learner: LearnerConfig::default(),
            suites: vec![SuiteName::S, SuiteName::D, SuiteName::N],
            trials: 5,
            seed: 0,
            out_dir: None,
        }
    }
}

fn prefixed(section: &str, e: ConfigError) -> RunConfigError {
    match e {
        ConfigError::Invalid { field, reason } => {
            RunConfigError::Invalid { field: format!("{section}.{field}"), reason }
        }
    }
}

fn invalid(field: &str, reason: &str) -> RunConfigError {
    RunConfigError::Invalid { field: field.into(), reason: reason.into() }
}

impl RunConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, RunConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| RunConfigError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| RunConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<(), RunConfigError> {
        self.grasper.validate().map_err(|e| prefixed("grasper", e))?;
        self.object.validate().map_err(|e| prefixed("object", e))?;
        self.sensors.validate().map_err(|e| prefixed("sensors", e))?;
        if self.episode.max_steps == 0 {
            return Err(invalid("episode.max_steps", "must be > 0"));
        }
        if !(self.episode.stop_threshold_e_omega > 0.0 && self.episode.stop_threshold_e_omega <= 100.0) {
            return Err(invalid("episode.stop_threshold_e_omega", "must lie in (0, 100]"));
        }
        if self.expert.count == 0 {
            return Err(invalid("expert.count", "must be > 0"));
        }
        if self.learner.epochs == 0 {
            return Err(invalid("learner.epochs", "must be > 0"));
        }
        if self.learner.batch == 0 {
            return Err(invalid("learner.batch", "must be > 0"));
        }
        if !(self.learner.lr.is_finite() && self.learner.lr > 0.0) {
            return Err(invalid("learner.lr", "must be finite and > 0"));
        }
        if self.suites.is_empty() {
            return Err(invalid("suites", "must name at least one suite"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be > 0"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical serialisation of every field that affects
    /// results; the output directory is excluded.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { out_dir: None, ..self.clone() };
        let bytes = serde_json::to_vec(&canonical).expect("config serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn episode_options(&self) -> EpisodeOptions {
        EpisodeOptions { max_steps: self.episode.max_steps, stop_threshold: Some(self.episode.stop_threshold_e_omega) }
    }

    pub fn train_hyper(&self) -> TrainHyper {
        TrainHyper { epochs: self.learner.epochs, batch: self.learner.batch, lr: self.learner.lr, seed: self.seed }
    }
}
