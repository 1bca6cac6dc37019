use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use super::{decide, Decision, OperationRequest};
use crate::harness::taxonomy::{EffectiveRange, Impact, Target};
use crate::profile::{Layer, Profile};

/// Profiles attached to each layer. `None` means the layer runs unconfined;
/// a layer missing from the map cannot be used by a scenario.
pub type ProfileSet = BTreeMap<Layer, Option<Profile>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub layer: Layer,
    pub op: OperationRequest,
    /// Later steps are unreachable when this one is denied. Every step is a
    /// gate under first-deny evaluation; the flag is carried for reports.
    #[serde(default = "yes")]
    pub gate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edb: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cve: Option<String>,
}

/// An exploit modeled as an ordered list of mediated operations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub target: Target,
    /// Impact categories; a single string is accepted for one impact.
    #[serde(rename = "category", deserialize_with = "one_or_many")]
    pub categories: Vec<Impact>,
    #[serde(default)]
    pub effective_range: Option<EffectiveRange>,
    pub steps: Vec<Step>,
    #[serde(default)]
    pub refs: Refs,
    /// Attack stages outside AppArmor's reach (KASLR bypass, namespace
    /// switching, seccomp), kept for reporting only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub narrative: Vec<String>,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Impact>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Impact),
        Many(Vec<Impact>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(i) => vec![i],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ScenarioOutcome {
    Succeeded {
        steps: usize,
    },
    /// `index` is zero-based.
    Blocked {
        index: usize,
        decision: Decision,
    },
}

impl ScenarioOutcome {
    pub fn is_blocked(&self) -> bool {
        matches!(self, ScenarioOutcome::Blocked { .. })
    }
}

impl fmt::Display for ScenarioOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioOutcome::Succeeded { steps } => write!(f, "succeeded ({steps} steps)"),
            ScenarioOutcome::Blocked { index, decision } => {
                write!(f, "blocked at step {} ({decision})", index + 1)
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario {scenario}: no profile entry for the {layer} layer")]
    UnknownLayer { scenario: String, layer: Layer },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Malformed { path: PathBuf, msg: String },
}

/// Evaluate steps in order; the first denied step blocks the scenario.
pub fn run_scenario(
    profiles: &ProfileSet,
    scenario: &Scenario,
) -> Result<ScenarioOutcome, ScenarioError> {
    for (index, step) in scenario.steps.iter().enumerate() {
        let profile = profiles
            .get(&step.layer)
            .ok_or_else(|| ScenarioError::UnknownLayer {
                scenario: scenario.id.clone(),
                layer: step.layer,
            })?;
        let decision = decide(profile.as_ref(), &step.op);
        if !decision.is_allow() {
            return Ok(ScenarioOutcome::Blocked { index, decision });
        }
    }
    Ok(ScenarioOutcome::Succeeded {
        steps: scenario.steps.len(),
    })
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| e.to_string())?;
        for (i, step) in s.steps.iter().enumerate() {
            step.op
                .validate()
                .map_err(|e| format!("step {}: {e}", i + 1))?;
        }
        Ok(s)
    }
}

/// Load every `*.json` scenario in a directory, sorted by file name.
pub fn load_scenarios(dir: &Path) -> Result<Vec<Scenario>, ScenarioError> {
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| ScenarioError::Io { path, source }
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io(dir))?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(io(p))?;
            Scenario::from_json(&text).map_err(|msg| ScenarioError::Malformed {
                path: p.clone(),
                msg,
            })
        })
        .collect()
}
