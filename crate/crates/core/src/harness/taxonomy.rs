//! Two-dimensional exploit classification: target object × impact, with an
//! effective range for privilege escalation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::sim::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    WebApplication,
    Server,
    Database,
    Kernel,
}

impl Target {
    pub const ALL: [Target; 4] = [
        Target::WebApplication,
        Target::Server,
        Target::Database,
        Target::Kernel,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Target::WebApplication => "Web Application",
            Target::Server => "Server",
            Target::Database => "Database",
            Target::Kernel => "Kernel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impact {
    Bypass,
    GainPrivilege,
    #[serde(rename = "dos")]
    DoS,
    GainInformation,
    ExecuteCode,
}

impl Impact {
    pub fn label(self) -> &'static str {
        match self {
            Impact::Bypass => "Bypass",
            Impact::GainPrivilege => "Gain Privilege",
            Impact::DoS => "DoS",
            Impact::GainInformation => "Gain Information",
            Impact::ExecuteCode => "Execute Code",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveRange {
    InsideContainer,
    ContainerEscape,
}

impl EffectiveRange {
    pub fn label(self) -> &'static str {
        match self {
            EffectiveRange::InsideContainer => "Inside Container",
            EffectiveRange::ContainerEscape => "Container Escape",
        }
    }
}

/// One classification bucket. `effective_range` is set exactly when the
/// impact is privilege gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AttackClass {
    pub target: Target,
    pub impact: Impact,
    pub effective_range: Option<EffectiveRange>,
}

impl AttackClass {
    pub fn new(
        target: Target,
        impact: Impact,
        effective_range: Option<EffectiveRange>,
    ) -> Result<Self, String> {
        match (impact, effective_range) {
            (Impact::GainPrivilege, None) => Err("gain_privilege needs an effective_range".into()),
            (Impact::GainPrivilege, Some(_)) | (_, None) => Ok(AttackClass {
                target,
                impact,
                effective_range,
            }),
            (other, Some(_)) => Err(format!(
                "effective_range is only meaningful for gain_privilege, not {}",
                other.label()
            )),
        }
    }

    /// Row label, e.g. `Gain Privilege (Inside Container)`.
    pub fn row_label(&self) -> String {
        match self.effective_range {
            Some(r) => format!("{} ({})", self.impact.label(), r.label()),
            None => self.impact.label().to_owned(),
        }
    }
}

impl fmt::Display for AttackClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}", self.target.label(), self.row_label())
    }
}

/// The buckets a scenario belongs to, one per impact.
pub fn attack_classes(s: &Scenario) -> Result<Vec<AttackClass>, String> {
    if s.categories.is_empty() {
        return Err(format!("scenario {}: no category", s.id));
    }
    let has_priv = s.categories.contains(&Impact::GainPrivilege);
    if s.effective_range.is_some() && !has_priv {
        return Err(format!(
            "scenario {}: effective_range given but impact is not gain_privilege",
            s.id
        ));
    }
    s.categories
        .iter()
        .map(|&impact| {
            let range = if impact == Impact::GainPrivilege {
                s.effective_range
            } else {
                None
            };
            AttackClass::new(s.target, impact, range).map_err(|e| format!("scenario {}: {e}", s.id))
        })
        .collect()
}

/// Count of scenarios per bucket.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TaxonomyReport {
    pub scenarios: usize,
    #[serde(serialize_with = "serialize_buckets")]
    pub buckets: BTreeMap<AttackClass, usize>,
    /// Distinct scenarios per target. Can be less than the column sum when
    /// a scenario has several impacts.
    pub totals: BTreeMap<Target, usize>,
}

fn serialize_buckets<S: serde::Serializer>(
    m: &BTreeMap<AttackClass, usize>,
    s: S,
) -> Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Entry<'a> {
        class: &'a AttackClass,
        count: usize,
    }
    s.collect_seq(m.iter().map(|(class, &count)| Entry { class, count }))
}

impl TaxonomyReport {
    pub fn count(&self, class: &AttackClass) -> usize {
        self.buckets.get(class).copied().unwrap_or(0)
    }

    pub fn bucket_total(&self) -> usize {
        self.buckets.values().sum()
    }

    /// Fixed row layout: every impact, with privilege gain split by range.
    pub fn rows() -> Vec<(Impact, Option<EffectiveRange>)> {
        vec![
            (Impact::Bypass, None),
            (Impact::GainPrivilege, Some(EffectiveRange::InsideContainer)),
            (Impact::GainPrivilege, Some(EffectiveRange::ContainerEscape)),
            (Impact::DoS, None),
            (Impact::GainInformation, None),
            (Impact::ExecuteCode, None),
        ]
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let width = 36;
        let _ = write!(out, "{:<width$}", "Category");
        for t in Target::ALL {
            let _ = write!(out, "{:>17}", t.label());
        }
        let _ = writeln!(out, "{:>8}", "Total");
        for (impact, range) in Self::rows() {
            let label = AttackClass {
                target: Target::Kernel,
                impact,
                effective_range: range,
            }
            .row_label();
            let _ = write!(out, "{label:<width$}");
            let mut row_total = 0;
            for target in Target::ALL {
                let n = self.count(&AttackClass {
                    target,
                    impact,
                    effective_range: range,
                });
                row_total += n;
                let cell = if n == 0 {
                    "-".to_string()
                } else {
                    n.to_string()
                };
                let _ = write!(out, "{cell:>17}");
            }
            let _ = writeln!(out, "{row_total:>8}");
        }
        let _ = write!(out, "{:<width$}", "Total");
        for t in Target::ALL {
            let _ = write!(out, "{:>17}", self.totals.get(&t).copied().unwrap_or(0));
        }
        let _ = writeln!(out, "{:>8}", self.scenarios);
        out
    }
}

/// Bucket every scenario. Fails on the first scenario that violates the
/// effective-range rule.
pub fn classify(scenarios: &[Scenario]) -> Result<TaxonomyReport, String> {
    let mut report = TaxonomyReport {
        scenarios: scenarios.len(),
        ..Default::default()
    };
    let mut seen: BTreeMap<Target, BTreeSet<&str>> = BTreeMap::new();
    for s in scenarios {
        for class in attack_classes(s)? {
            *report.buckets.entry(class).or_default() += 1;
        }
        seen.entry(s.target).or_default().insert(&s.id);
    }
    report.totals = seen.into_iter().map(|(t, ids)| (t, ids.len())).collect();
    Ok(report)
}
