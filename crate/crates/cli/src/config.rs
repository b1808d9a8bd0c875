//! Run configuration: one TOML document with a section per stage.
//!
//! Resolution order, later wins: built-in defaults, the `--config` file,
//! `--set key.path=value` overrides, subcommand flags, `--seed`. The top-level
//! seed is copied into every per-section seed, so one number pins a run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use enwarsim::handover::{EnsembleConfig, HandoverConfig};
use enwarsim::orchestrator::OrchestratorConfig;
use enwarsim::routing::{EvalMix, RewardParams, SweepConfig, TrainConfig};
use enwarsim::scenario::ScenarioConfig;
use enwarsim::sensing::{CorpusConfig, ForestConfig};
use enwarsim::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSection {
    pub samples: usize,
    /// Share of the corpus held out for scoring.
    pub holdout_fraction: f64,
    pub corpus: CorpusConfig,
    pub forest: ForestConfig,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        Self {
            samples: 20_000,
            holdout_fraction: 0.2,
            corpus: CorpusConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicySection {
    pub train: TrainConfig,
    pub reward: RewardParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub episodes: usize,
    pub mix: EvalMix,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            episodes: 1000,
            mix: EvalMix::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandoverSection {
    pub ensemble: EnsembleConfig,
    pub fsm: HandoverConfig,
    /// Ticks after the event onset at which delivered power is scored.
    pub horizon: usize,
}

impl Default for HandoverSection {
    fn default() -> Self {
        Self {
            ensemble: EnsembleConfig::default(),
            fsm: HandoverConfig::default(),
            horizon: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub classifier: ClassifierSection,
    pub policy: PolicySection,
    pub simulate: OrchestratorConfig,
    pub eval: EvalSection,
    pub sweep: SweepConfig,
    pub handover: HandoverSection,
}

impl RunConfig {
    /// Copies the top-level seed into every section.
    pub fn propagate_seed(&mut self) {
        let s = self.seed;
        self.scenario.seed = s;
        self.classifier.forest.seed = s;
        self.policy.train.seed = s;
        self.simulate.seed = s;
        self.sweep.seed = s;
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

/// Reads a TOML config, or the `config` object of a JSON run manifest.
pub fn load_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingAsset(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let cfg = v.get("config").cloned().unwrap_or(v);
        let t: toml::Value = serde_json::from_value(cfg)?;
        return match t {
            toml::Value::Table(t) => Ok(t),
            _ => Err(invalid(format!("{}: config must be an object", path.display()))),
        };
    }
    text.parse::<toml::Table>()
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Parses a scalar or inline TOML value; bare words become strings.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `key.path=value` to a TOML table, creating sections as needed.
pub fn apply_set(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| invalid(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(invalid(format!("override key `{key}` is malformed")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| invalid(format!("override key `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Every leaf path of `given` must exist in `known`, which catches typos
/// that section defaults would otherwise swallow.
fn check_known(given: &toml::Table, known: &toml::Table, prefix: &str) -> Result<()> {
    for (k, v) in given {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (v, known.get(k)) {
            (_, None) => return Err(invalid(format!("unknown config key `{path}`"))),
            (toml::Value::Table(g), Some(toml::Value::Table(kn))) => check_known(g, kn, &path)?,
            _ => {}
        }
    }
    Ok(())
}

pub fn resolve(table: toml::Table) -> Result<RunConfig> {
    let cfg: RunConfig = toml::Value::Table(table.clone())
        .try_into()
        .map_err(|e: toml::de::Error| invalid(e.message().to_string()))?;
    let known = toml::Table::try_from(&cfg).map_err(|e| invalid(e.to_string()))?;
    check_known(&table, &known, "")?;
    Ok(cfg)
}
