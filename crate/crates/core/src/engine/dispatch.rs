use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perms::{Perm, PermSet};

/// The eight rule families the generator can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleKind {
    FileAccess,
    Execution,
    Link,
    Mount,
    PivotRoot,
    Capability,
    Network,
    Deny,
}

impl RuleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::FileAccess => "file_access",
            RuleKind::Execution => "execution",
            RuleKind::Link => "link",
            RuleKind::Mount => "mount",
            RuleKind::PivotRoot => "pivot_root",
            RuleKind::Capability => "capability",
            RuleKind::Network => "network",
            RuleKind::Deny => "deny",
        }
    }

    /// Kinds that a kernel-operation record can produce.
    pub fn is_trace_derived(self) -> bool {
        matches!(
            self,
            RuleKind::FileAccess
                | RuleKind::Execution
                | RuleKind::Link
                | RuleKind::Mount
                | RuleKind::PivotRoot
        )
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleKind {
    type Err = DispatchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "file_access" => RuleKind::FileAccess,
            "execution" => RuleKind::Execution,
            "link" => RuleKind::Link,
            "mount" => RuleKind::Mount,
            "pivot_root" => RuleKind::PivotRoot,
            "capability" => RuleKind::Capability,
            "network" => RuleKind::Network,
            "deny" => RuleKind::Deny,
            other => return Err(DispatchError::UnknownKind(other.into())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DispatchError {
    #[error("unknown rule kind {0:?}")]
    UnknownKind(String),
    #[error("kind {0} cannot be produced from trace records")]
    NotTraceDerived(RuleKind),
    #[error("duplicate pattern {0:?}")]
    DuplicatePattern(String),
    #[error("empty pattern")]
    EmptyPattern,
    #[error("bad mask {mask:?} for pattern {pattern:?}")]
    BadMask { pattern: String, mask: String },
    #[error("table needs exactly one pivot_root entry, found {0}")]
    PivotRootCount(usize),
    #[error("dispatch table json: {0}")]
    Json(String),
}

/// One probe-point pattern. A trailing `*` matches any suffix; otherwise
/// the probe name must match exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DispatchEntry {
    pub pattern: String,
    pub kind: RuleKind,
    pub mask: PermSet,
}

impl DispatchEntry {
    pub fn matches(&self, probe_point: &str) -> bool {
        match self.pattern.strip_suffix('*') {
            Some(prefix) => probe_point.starts_with(prefix),
            None => probe_point == self.pattern,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    pattern: String,
    kind: String,
    #[serde(default)]
    mask: String,
}

/// Ordered probe-point → rule-kind map. First match wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DispatchTable {
    entries: Vec<DispatchEntry>,
}

const DEFAULT_TABLE: &str = include_str!("../../data/dispatch.json");

impl DispatchTable {
    pub fn new(entries: Vec<DispatchEntry>) -> Result<Self, DispatchError> {
        let mut pivots = 0;
        for (i, e) in entries.iter().enumerate() {
            if e.pattern.is_empty() {
                return Err(DispatchError::EmptyPattern);
            }
            if entries[..i].iter().any(|p| p.pattern == e.pattern) {
                return Err(DispatchError::DuplicatePattern(e.pattern.clone()));
            }
            if !e.kind.is_trace_derived() {
                return Err(DispatchError::NotTraceDerived(e.kind));
            }
            let bad_mask = match e.kind {
                RuleKind::FileAccess => e.mask.is_empty() || e.mask.contains(Perm::Exec),
                RuleKind::Execution => e.mask != PermSet::EMPTY.with(Perm::Exec),
                _ => false,
            };
            if bad_mask {
                return Err(DispatchError::BadMask {
                    pattern: e.pattern.clone(),
                    mask: e.mask.to_string(),
                });
            }
            if e.kind == RuleKind::PivotRoot {
                pivots += 1;
            }
        }
        if pivots != 1 {
            return Err(DispatchError::PivotRootCount(pivots));
        }
        Ok(DispatchTable { entries })
    }

    /// Parse the JSON form: an array of `{"pattern", "kind", "mask"}`.
    pub fn from_json(text: &str) -> Result<Self, DispatchError> {
        let raw: Vec<RawEntry> =
            serde_json::from_str(text).map_err(|e| DispatchError::Json(e.to_string()))?;
        let entries = raw
            .into_iter()
            .map(|r| {
                let mask = r
                    .mask
                    .parse::<PermSet>()
                    .map_err(|_| DispatchError::BadMask {
                        pattern: r.pattern.clone(),
                        mask: r.mask.clone(),
                    })?;
                Ok(DispatchEntry {
                    kind: r.kind.parse()?,
                    pattern: r.pattern,
                    mask,
                })
            })
            .collect::<Result<Vec<_>, DispatchError>>()?;
        DispatchTable::new(entries)
    }

    pub fn to_json(&self) -> String {
        let raw: Vec<RawEntry> = self
            .entries
            .iter()
            .map(|e| RawEntry {
                pattern: e.pattern.clone(),
                kind: e.kind.as_str().into(),
                mask: e.mask.to_string(),
            })
            .collect();
        serde_json::to_string_pretty(&raw).expect("serializable")
    }

    pub fn entries(&self) -> &[DispatchEntry] {
        &self.entries
    }
}

impl Default for DispatchTable {
    fn default() -> Self {
        DispatchTable::from_json(DEFAULT_TABLE).expect("built-in dispatch table is valid")
    }
}

/// Look up the rule kind and permission mask for a probe point. `None`
/// means the record is not dispatched and is skipped.
pub fn dispatch_rule(probe_point: &str, table: &DispatchTable) -> Option<(RuleKind, PermSet)> {
    table
        .entries
        .iter()
        .find(|e| e.matches(probe_point))
        .map(|e| (e.kind, e.mask))
}
