//! Scenario documents: JSON in, a fully validated [`ScenarioConfig`] out.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{PerTier, Split, Tier, DEFAULT_EDGE_POWER};
use crate::link::ProbeConfig;
use crate::profile::{preset_profile, ModelProfile, ProfileDocument};
use crate::scheduler::SchedulerConfig;
use crate::search::ObjectiveWeights;
use crate::simenv::{HopSpec, NodeSpec, NoiseSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    SingleDevice(Tier),
    Static,
    Adaptive,
    Compare,
}

impl Mode {
    pub fn needs_adaptive(self) -> bool {
        matches!(self, Mode::Adaptive | Mode::Compare)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::SingleDevice(t) => write!(f, "single-device:{t}"),
            Mode::Static => f.write_str("static"),
            Mode::Adaptive => f.write_str("adaptive"),
            Mode::Compare => f.write_str("compare"),
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "static" => Ok(Mode::Static),
            "adaptive" => Ok(Mode::Adaptive),
            "compare" => Ok(Mode::Compare),
            _ => s
                .strip_prefix("single-device:")
                .and_then(Tier::parse)
                .map(Mode::SingleDevice)
                .ok_or_else(|| {
                    format!(
                        "unknown mode `{s}`, expected one of `static`, `adaptive`, `compare`, \
                         `single-device:edge`, `single-device:fog`, `single-device:cloud`"
                    )
                }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileRef {
    Preset(String),
    File(PathBuf),
    Inline(ProfileDocument),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodesDocument {
    pub edge: NodeSpec,
    pub fog: NodeSpec,
    pub cloud: NodeSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopsDocument {
    pub edge_fog: HopSpec,
    pub fog_cloud: HopSpec,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseDocument {
    #[serde(default)]
    pub sigma: f64,
}

fn default_r_profile() -> usize {
    50
}
fn default_r_probe() -> usize {
    15
}
fn default_r_steady() -> usize {
    100
}
fn default_warmup() -> usize {
    5
}
fn default_threshold() -> f64 {
    0.03
}
fn default_min_edge() -> usize {
    1
}
fn default_edge_power() -> f64 {
    DEFAULT_EDGE_POWER
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerDocument {
    pub initial_split: [usize; 2],
    #[serde(default)]
    pub weights: ObjectiveWeights,
    #[serde(default)]
    pub deadline_s: f64,
    #[serde(default = "default_r_profile")]
    pub r_profile: usize,
    #[serde(default = "default_r_probe")]
    pub r_probe: usize,
    #[serde(default = "default_r_steady")]
    pub r_steady: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "default_threshold")]
    pub switch_threshold: f64,
    #[serde(default = "default_min_edge")]
    pub min_edge_layers: usize,
    #[serde(default = "default_edge_power")]
    pub edge_power_w: f64,
    #[serde(default)]
    pub probe: ProbeConfig,
}

fn default_mode() -> Mode {
    Mode::Adaptive
}
fn default_budget() -> usize {
    500
}
fn default_reps() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDocument {
    #[serde(default = "default_mode", with = "mode_serde")]
    pub mode: Mode,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ExperimentDocument {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            budget: default_budget(),
            repetitions: default_reps(),
            seed: 0,
        }
    }
}

mod mode_serde {
    use super::Mode;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Mode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&m.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mode, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Raw on-disk scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub profile: ProfileRef,
    pub nodes: NodesDocument,
    pub hops: HopsDocument,
    #[serde(default)]
    pub noise: NoiseDocument,
    pub scheduler: SchedulerDocument,
    #[serde(default)]
    pub experiment: ExperimentDocument,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentSettings {
    pub mode: Mode,
    pub budget: usize,
    pub repetitions: usize,
    pub seed: u64,
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub notes: Option<String>,
    pub profile: ModelProfile,
    pub nodes: PerTier<NodeSpec>,
    pub edge_fog: HopSpec,
    pub fog_cloud: HopSpec,
    pub noise_sigma: f64,
    pub scheduler: SchedulerConfig,
    pub experiment: ExperimentSettings,
}

impl ScenarioConfig {
    pub fn noise(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            sigma: self.noise_sigma,
            seed,
        }
    }

    pub fn set_budget(&mut self, budget: usize) {
        self.experiment.budget = budget;
        self.scheduler.total_budget = budget;
    }

    /// Checks every cross-field invariant; errors carry the field path.
    pub fn validate(&self) -> Result<()> {
        for tier in Tier::ALL {
            self.nodes[tier].validate(&format!("nodes.{tier}"))?;
        }
        self.edge_fog.validate("hops.edge_fog")?;
        self.fog_cloud.validate("hops.fog_cloud")?;
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise.sigma", "must be finite and >= 0"));
        }
        self.scheduler.validate(self.profile.n_features())?;
        let exp = &self.experiment;
        if exp.repetitions < 1 {
            return Err(Error::config("experiment.repetitions", "must be >= 1"));
        }
        if exp.budget <= self.scheduler.warmup {
            return Err(Error::config(
                "experiment.budget",
                format!("must exceed warmup ({})", self.scheduler.warmup),
            ));
        }
        if exp.mode.needs_adaptive() && exp.budget < self.scheduler.minimum_budget() {
            return Err(Error::BudgetTooSmall {
                budget: exp.budget,
                minimum: self.scheduler.minimum_budget(),
            });
        }
        Ok(())
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse {
            path: if path == "." { "<document>".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

/// Parses and validates a scenario. Profile file references resolve against
/// `base_dir` (the current directory when `None`).
pub fn load_scenario(text: &str, base_dir: Option<&Path>) -> Result<ScenarioConfig> {
    let doc: ScenarioDocument = parse_json(text)?;
    resolve(doc, base_dir)
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_scenario(&text, path.parent())
}

fn profile_field(e: Error) -> Error {
    match e {
        Error::InvalidProfile { field, reason } => Error::config(format!("profile.{field}"), reason),
        Error::Parse { path, message } => Error::Parse {
            path: format!("profile.{path}"),
            message,
        },
        other => other,
    }
}

pub fn load_profile_ref(profile: &ProfileRef, base_dir: Option<&Path>) -> Result<ModelProfile> {
    match profile {
        ProfileRef::Preset(name) => preset_profile(name),
        ProfileRef::Inline(doc) => doc.clone().into_profile().map_err(profile_field),
        ProfileRef::File(rel) => {
            let path = match base_dir {
                Some(dir) if rel.is_relative() => dir.join(rel),
                _ => rel.clone(),
            };
            let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            ModelProfile::from_json(&text).map_err(|e| match e {
                Error::Parse { path: field, message } => Error::Parse {
                    path: format!("{} ({field})", path.display()),
                    message,
                },
                Error::InvalidProfile { field, reason } => Error::InvalidProfile {
                    field: format!("{}: {field}", path.display()),
                    reason,
                },
                other => other,
            })
        }
    }
}

fn resolve(doc: ScenarioDocument, base_dir: Option<&Path>) -> Result<ScenarioConfig> {
    let profile = load_profile_ref(&doc.profile, base_dir)?;
    let s = doc.scheduler;
    let scheduler = SchedulerConfig {
        initial_split: Split::new(s.initial_split[0], s.initial_split[1]),
        weights: s.weights,
        deadline: s.deadline_s,
        r_profile: s.r_profile,
        r_probe: s.r_probe,
        r_steady: s.r_steady,
        warmup: s.warmup,
        switch_threshold: s.switch_threshold,
        min_edge_layers: s.min_edge_layers,
        total_budget: doc.experiment.budget,
        probe: s.probe,
        edge_power: s.edge_power_w,
    };
    let config = ScenarioConfig {
        name: doc.name,
        notes: doc.notes,
        profile,
        nodes: PerTier::new(doc.nodes.edge, doc.nodes.fog, doc.nodes.cloud),
        edge_fog: doc.hops.edge_fog,
        fog_cloud: doc.hops.fog_cloud,
        noise_sigma: doc.noise.sigma,
        scheduler,
        experiment: ExperimentSettings {
            mode: doc.experiment.mode,
            budget: doc.experiment.budget,
            repetitions: doc.experiment.repetitions,
            seed: doc.experiment.seed,
        },
    };
    config.validate()?;
    Ok(config)
}
