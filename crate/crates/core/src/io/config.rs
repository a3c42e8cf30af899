use crate::experiments::{AuditKind, ExperimentSpec, Lattice, ModelPoint};
use crate::models::ScalarFunctionModel;
use crate::spde::{SolverConfig, SpdeError};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A configuration problem tied to a key and, when it can be found, the
/// 1-based line of the file it sits on.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config key `{}` (line {l}): {}", self.key, self.message),
            None => write!(f, "config key `{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub b: ScalarFunctionModel,
    pub sigma: ScalarFunctionModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<ScalarFunctionModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    /// Constant initial datum.
    pub value: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub replications: u64,
    pub master_seed: u64,
    pub refine: bool,
    pub audits: Vec<AuditKind>,
    pub budget_seconds: Option<f64>,
    pub lattice: Option<Lattice>,
    pub points: Vec<ModelPoint>,
    /// Snapshot every step so the trajectory dump supports the ledger audit.
    pub snapshots: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let d = ExperimentSpec::default();
        Self {
            name: d.name,
            replications: d.replications,
            master_seed: d.master_seed,
            refine: d.refine,
            audits: d.audits,
            budget_seconds: None,
            lattice: None,
            points: vec![],
            snapshots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseBSection {
    pub c_lower: f64,
    pub c_upper: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallNoiseSection {
    pub c_upper: Option<f64>,
    pub gamma_1: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    /// Any of "a", "b".
    pub cases: Vec<String>,
    pub osgood: bool,
    pub convexity: bool,
    pub theta: Option<f64>,
    pub sigma_upper: Option<f64>,
    pub case_b: Option<CaseBSection>,
    pub small_noise: Option<SmallNoiseSection>,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self { cases: vec!["a".into()], osgood: true, convexity: true, theta: None, sigma_upper: None, case_b: None, small_noise: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<ModelSection>,
    pub solver: Option<SolverConfig>,
    pub initial: Option<InitialSection>,
    pub experiment: Option<ExperimentSection>,
    pub check: Option<CheckSection>,
}

/// 1-based line of byte offset `pos`.
fn line_of(src: &str, pos: usize) -> usize {
    src[..pos.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Dotted key at the start of a TOML error span.
fn key_at(src: &str, pos: usize) -> String {
    let line_no = line_of(src, pos);
    let mut section = String::new();
    let mut key = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if i + 1 > line_no {
            break;
        }
        if t.starts_with('[') {
            section = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if i + 1 == line_no {
            if let Some((k, _)) = t.split_once('=') {
                key = k.trim().to_string();
            }
        }
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

/// Line holding `key` inside `[section]`, if present.
pub fn locate_key(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        } else if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

pub fn parse_config(src: &str) -> Result<ConfigFile, ConfigError> {
    toml::from_str(src).map_err(|e: toml::de::Error| {
        let (key, line) = match e.span() {
            Some(span) => (key_at(src, span.start), Some(line_of(src, span.start))),
            None => (String::new(), None),
        };
        ConfigError { key, line, message: e.message().to_string() }
    })
}

fn solver_error(src: &str, e: SpdeError) -> ConfigError {
    match e {
        SpdeError::Config { key, reason } => {
            let line = locate_key(src, "solver", &key);
            ConfigError { key: format!("solver.{key}"), line, message: reason }
        }
        other => ConfigError { key: "solver".into(), line: None, message: other.to_string() },
    }
}

fn missing(key: &str) -> ConfigError {
    ConfigError { key: key.into(), line: None, message: "section is required".into() }
}

/// Everything `simulate` needs, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub model: ModelSection,
    pub solver: SolverConfig,
    pub initial: f64,
    pub master_seed: u64,
    pub snapshots: bool,
}

impl ConfigFile {
    pub fn simulate(&self, src: &str) -> Result<SimulateConfig, ConfigError> {
        let model = self.model.clone().ok_or_else(|| missing("model"))?;
        let solver = self.solver.clone().unwrap_or_default();
        let initial = self.initial.clone().unwrap_or_default().value;
        if !initial.is_finite() {
            return Err(ConfigError { key: "initial.value".into(), line: locate_key(src, "initial", "value"), message: "must be finite".into() });
        }
        let initial_max = initial.abs().max(1.0);
        solver.validate(Some(initial_max), true).map_err(|e| solver_error(src, e))?;
        let exp = self.experiment.clone().unwrap_or_default();
        Ok(SimulateConfig { model, solver, initial, master_seed: exp.master_seed, snapshots: exp.snapshots })
    }

    /// Campaign spec: explicit points and lattice, or the single `[model]`.
    pub fn experiment(&self, src: &str) -> Result<ExperimentSpec, ConfigError> {
        let exp = self.experiment.clone().ok_or_else(|| missing("experiment"))?;
        let mut points = exp.points.clone();
        if points.is_empty() && exp.lattice.is_none() {
            let m = self.model.clone().ok_or_else(|| missing("model"))?;
            points.push(ModelPoint { label: "model".into(), b: m.b, sigma: m.sigma, h: m.h, beta: None, gamma: None, amplitude: None });
        }
        let spec = ExperimentSpec {
            name: exp.name,
            points,
            lattice: exp.lattice,
            solver: self.solver.clone().unwrap_or_default(),
            replications: exp.replications,
            master_seed: exp.master_seed,
            initial_value: self.initial.clone().unwrap_or_default().value,
            refine: exp.refine,
            audits: exp.audits,
            budget_seconds: exp.budget_seconds,
        };
        spec.validate().map_err(|e| match e {
            crate::experiments::ExperimentError::Solver(s) => solver_error(src, s),
            other => ConfigError { key: "experiment".into(), line: None, message: other.to_string() },
        })?;
        Ok(spec)
    }
}

/// TOML text of a campaign spec that parses back to the same spec.
pub fn effective_config(spec: &ExperimentSpec) -> String {
    let file = ConfigFile {
        model: None,
        solver: Some(spec.solver.clone()),
        initial: Some(InitialSection { value: spec.initial_value }),
        experiment: Some(ExperimentSection {
            name: spec.name.clone(),
            replications: spec.replications,
            master_seed: spec.master_seed,
            refine: spec.refine,
            audits: spec.audits.clone(),
            budget_seconds: spec.budget_seconds,
            lattice: spec.lattice.clone(),
            points: spec.points.clone(),
            snapshots: false,
        }),
        check: None,
    };
    toml::to_string(&file).expect("config serializes")
}
