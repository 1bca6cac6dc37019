//! Scenario × profile-set evaluation and its bucketed result matrix.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::taxonomy::{attack_classes, AttackClass};
use crate::profile::{parse_profile, Layer, ParseError};
use crate::sim::{run_scenario, ProfileSet, Scenario, ScenarioError, ScenarioOutcome};

const UNCONFINED: &str = "unconfined";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("profile-set manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Profile {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("unknown profile-set label {0:?}")]
    UnknownLabel(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Taxonomy(String),
}

/// Labelled profile sets, in label order.
#[derive(Debug, Clone, Default)]
pub struct ProfileSets {
    pub sets: BTreeMap<String, ProfileSet>,
}

impl ProfileSets {
    /// Read a manifest of the form
    /// `{"label": {"container": "path" | "unconfined", "host": ...}}`.
    /// Paths are relative to the manifest.
    pub fn load(manifest: &Path) -> Result<Self, EvalError> {
        let io = |path: &Path| {
            let path = path.to_owned();
            move |source| EvalError::Io { path, source }
        };
        let text = fs::read_to_string(manifest).map_err(io(manifest))?;
        let raw: BTreeMap<String, BTreeMap<Layer, String>> =
            serde_json::from_str(&text).map_err(|e| EvalError::Manifest(e.to_string()))?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        let mut sets = BTreeMap::new();
        for (label, layers) in raw {
            let mut set = ProfileSet::new();
            for (layer, entry) in layers {
                let profile = if entry == UNCONFINED {
                    None
                } else {
                    let path = base.join(&entry);
                    let text = fs::read_to_string(&path).map_err(io(&path))?;
                    let p = parse_profile(&text, layer)
                        .map_err(|source| EvalError::Profile { path, source })?;
                    Some(p)
                };
                set.insert(layer, profile);
            }
            sets.insert(label, set);
        }
        Ok(ProfileSets { sets })
    }

    /// Keep only `labels`. Fails on a label the manifest does not define.
    pub fn select(mut self, labels: &[String]) -> Result<Self, EvalError> {
        if let Some(l) = labels.iter().find(|l| !self.sets.contains_key(*l)) {
            return Err(EvalError::UnknownLabel(l.clone()));
        }
        self.sets.retain(|k, _| labels.contains(k));
        Ok(self)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub succeeded: usize,
    pub blocked: usize,
}

/// One scenario run against one profile set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutcomeRecord {
    pub scenario: String,
    pub label: String,
    pub blocked: bool,
    /// Zero-based index of the denied step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocked_at: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvaluationMatrix {
    pub labels: Vec<String>,
    pub rows: BTreeMap<AttackClass, BTreeMap<String, Cell>>,
    /// Scenarios per bucket.
    pub bucket_sizes: BTreeMap<AttackClass, usize>,
    /// Ordered by scenario, then label.
    pub outcomes: Vec<OutcomeRecord>,
}

/// Run every scenario against every profile set. Work is spread over a
/// thread pool; results come back in input order.
pub fn evaluate(scenarios: &[Scenario], sets: &ProfileSets) -> Result<EvaluationMatrix, EvalError> {
    let classes: Vec<Vec<AttackClass>> = scenarios
        .iter()
        .map(attack_classes)
        .collect::<Result<_, _>>()
        .map_err(EvalError::Taxonomy)?;

    let pairs: Vec<(&Scenario, &String, &ProfileSet)> = scenarios
        .iter()
        .flat_map(|s| sets.sets.iter().map(move |(l, p)| (s, l, p)))
        .collect();
    let outcomes: Vec<OutcomeRecord> = pairs
        .par_iter()
        .map(|(s, label, set)| {
            let outcome = run_scenario(set, s)?;
            let blocked_at = match &outcome {
                ScenarioOutcome::Blocked { index, .. } => Some(*index),
                ScenarioOutcome::Succeeded { .. } => None,
            };
            Ok(OutcomeRecord {
                scenario: s.id.clone(),
                label: (*label).clone(),
                blocked: outcome.is_blocked(),
                blocked_at,
                detail: outcome.to_string(),
            })
        })
        .collect::<Result<_, EvalError>>()?;

    let labels: Vec<String> = sets.sets.keys().cloned().collect();
    let mut m = EvaluationMatrix {
        labels: labels.clone(),
        ..Default::default()
    };
    let n = labels.len();
    for (i, cls) in classes.iter().enumerate() {
        for class in cls {
            *m.bucket_sizes.entry(*class).or_default() += 1;
            let row = m.rows.entry(*class).or_insert_with(|| {
                labels
                    .iter()
                    .map(|l| (l.clone(), Cell::default()))
                    .collect()
            });
            for rec in &outcomes[i * n..(i + 1) * n] {
                let cell = row.get_mut(&rec.label).expect("label present");
                if rec.blocked {
                    cell.blocked += 1;
                } else {
                    cell.succeeded += 1;
                }
            }
        }
    }
    m.outcomes = outcomes;
    Ok(m)
}

#[derive(Serialize)]
struct JsonRow<'a> {
    class: &'a AttackClass,
    scenarios: usize,
    cells: &'a BTreeMap<String, Cell>,
}

#[derive(Serialize)]
struct JsonMatrix<'a> {
    labels: &'a [String],
    rows: Vec<JsonRow<'a>>,
    outcomes: &'a [OutcomeRecord],
}

impl EvaluationMatrix {
    pub fn cell(&self, class: &AttackClass, label: &str) -> Cell {
        self.rows
            .get(class)
            .and_then(|r| r.get(label))
            .copied()
            .unwrap_or_default()
    }

    /// Column totals over distinct scenarios (not buckets).
    pub fn totals(&self, label: &str) -> Cell {
        let mut c = Cell::default();
        for r in self.outcomes.iter().filter(|r| r.label == label) {
            if r.blocked {
                c.blocked += 1;
            } else {
                c.succeeded += 1;
            }
        }
        c
    }

    pub fn to_json(&self) -> String {
        let rows = self
            .rows
            .iter()
            .map(|(class, cells)| JsonRow {
                class,
                scenarios: self.bucket_sizes[class],
                cells,
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&JsonMatrix {
            labels: &self.labels,
            rows,
            outcomes: &self.outcomes,
        })
        .expect("matrix serializes");
        s.push('\n');
        s
    }

    /// Aligned table; each cell reads `succeeded/blocked`.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let head = self
            .rows
            .keys()
            .map(|c| c.to_string().len())
            .max()
            .unwrap_or(0)
            .max("Category".len());
        let widths: Vec<usize> = self.labels.iter().map(|l| l.len().max(9)).collect();
        let _ = write!(out, "{:<head$}  {:>5}", "Category", "n");
        for (l, w) in self.labels.iter().zip(&widths) {
            let _ = write!(out, "  {l:>w$}");
        }
        out.push('\n');
        for (class, cells) in &self.rows {
            let _ = write!(
                out,
                "{:<head$}  {:>5}",
                class.to_string(),
                self.bucket_sizes[class]
            );
            for (l, w) in self.labels.iter().zip(&widths) {
                let c = cells[l];
                let _ = write!(out, "  {:>w$}", format!("{}/{}", c.succeeded, c.blocked));
            }
            out.push('\n');
        }
        let _ = write!(
            out,
            "{:<head$}  {:>5}",
            "Total",
            self.outcomes.len() / self.labels.len().max(1)
        );
        for (l, w) in self.labels.iter().zip(&widths) {
            let c = self.totals(l);
            let _ = write!(out, "  {:>w$}", format!("{}/{}", c.succeeded, c.blocked));
        }
        out.push('\n');
        out
    }
}
