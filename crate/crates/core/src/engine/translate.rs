use std::collections::BTreeMap;

use thiserror::Error;

use super::{dispatch_rule, EngineConfig, RuleKind};
use crate::perms::{Perm, PermSet};
use crate::profile::{drop_superseded_denies, Layer, MountRule, Profile, Rule};
use crate::trace::TraceRecord;

/// Attribute a record to the container or the host.
///
/// The cgroup path decides when present; when it is the placeholder, a
/// mount-namespace root inside the overlay filesystem marks a container.
pub fn classify_layer(rec: &TraceRecord, cfg: &EngineConfig) -> Layer {
    let container = match rec.cgroup_path() {
        "-" => rec.mntns_root().starts_with(&cfg.overlay_root_pattern),
        cgroup => cgroup.contains(&cfg.container_cgroup_pattern),
    };
    if container {
        Layer::Container
    } else {
        Layer::Host
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("{0} rule needs a path the record does not carry")]
    MissingResource(RuleKind),
    #[error("{0} rules are not built from trace records")]
    NotTraceDerived(RuleKind),
    #[error("invalid {kind} rule: {reason}")]
    Invalid { kind: RuleKind, reason: String },
}

/// Combine the record fields the rule kind needs into a rule.
pub fn build_rule(kind: RuleKind, mask: PermSet, rec: &TraceRecord) -> Result<Rule, BuildError> {
    let resource = || {
        rec.resource_path_opt()
            .map(str::to_owned)
            .ok_or(BuildError::MissingResource(kind))
    };
    let rule = match kind {
        RuleKind::FileAccess => Rule::FileAccess {
            path: resource()?,
            perms: mask,
        },
        RuleKind::Execution => Rule::Execution { path: resource()? },
        RuleKind::Link => {
            let src = rec
                .exec_path_opt()
                .ok_or(BuildError::MissingResource(kind))?;
            Rule::Link {
                src: src.to_owned(),
                dst: resource()?,
            }
        }
        RuleKind::Mount => Rule::Mount(MountRule {
            target: Some(resource()?),
            ..MountRule::default()
        }),
        RuleKind::PivotRoot => {
            let newroot = resource()?;
            Rule::PivotRoot {
                oldroot: rec.mntns_root_opt().map(str::to_owned),
                newroot: Some(newroot),
            }
        }
        RuleKind::Capability | RuleKind::Network | RuleKind::Deny => {
            return Err(BuildError::NotTraceDerived(kind))
        }
    };
    rule.validate()
        .map_err(|reason| BuildError::Invalid { kind, reason })?;
    Ok(rule)
}

/// Per-call counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TranslateStats {
    pub records: usize,
    pub no_dispatch: usize,
    pub missing_resource: usize,
    pub invalid: usize,
    /// Rules built per kind (before deduplication), including deny rules.
    pub built: BTreeMap<RuleKind, usize>,
    pub deny_shell_added: bool,
}

impl TranslateStats {
    pub fn skipped(&self) -> usize {
        self.no_dispatch + self.missing_resource + self.invalid
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation {
    pub container: Profile,
    pub host: Profile,
    pub stats: TranslateStats,
}

/// Fold a kernel-operation trace into the container and host profiles.
///
/// Each record is dispatched on its probe point, attributed to a layer, and
/// turned into a rule for that layer's profile. A single flag tracks
/// whether any container-side execution of a configured shell was seen; if
/// none was, every shell gets a `deny <shell> rwmklx` rule in the container
/// profile. The supplied profiles are starting points; generated rules are
/// added to them by union.
pub fn translate_trace(
    records: &[TraceRecord],
    cfg: &EngineConfig,
    container: Profile,
    host: Profile,
) -> Translation {
    let mut container = container;
    let mut host = host;
    let mut stats = TranslateStats {
        records: records.len(),
        ..Default::default()
    };
    let mut deny_shell = true;

    for rec in records {
        let Some((kind, mask)) = dispatch_rule(rec.probe_point(), &cfg.dispatch) else {
            stats.no_dispatch += 1;
            continue;
        };
        let layer = classify_layer(rec, cfg);
        let rule = match build_rule(kind, mask, rec) {
            Ok(r) => r,
            Err(BuildError::MissingResource(_)) => {
                stats.missing_resource += 1;
                continue;
            }
            Err(_) => {
                stats.invalid += 1;
                continue;
            }
        };
        if let Rule::Execution { path } = &rule {
            if layer == Layer::Container && cfg.shell_paths.iter().any(|s| s == path) {
                deny_shell = false;
            }
        }
        let target = match layer {
            Layer::Container => &mut container,
            Layer::Host => &mut host,
        };
        match target.insert(rule) {
            Ok(_) => *stats.built.entry(kind).or_default() += 1,
            Err(_) => stats.invalid += 1,
        }
    }

    // A shell execution carried over from the seed profile counts as observed,
    // so a re-run over more trace data behaves like one run over all of it.
    let is_shell = |path: &String| cfg.shell_paths.iter().any(|s| s == path);
    if container
        .rules()
        .any(|r| matches!(r, Rule::Execution { path } if is_shell(path)))
    {
        deny_shell = false;
    }

    if deny_shell {
        for shell in &cfg.shell_paths {
            let rule = Rule::Deny {
                path: shell.clone(),
                perms: PermSet::ALL,
            };
            if container.insert(rule).is_ok() {
                *stats.built.entry(RuleKind::Deny).or_default() += 1;
            }
        }
        stats.deny_shell_added = true;
    } else {
        container.retain(
            |r| !matches!(r, Rule::Deny { path, perms } if denies_exec(*perms) && is_shell(path)),
        );
    }
    drop_superseded_denies(&mut container);
    drop_superseded_denies(&mut host);

    Translation {
        container,
        host,
        stats,
    }
}

/// True when `perms` denies executing a path.
pub(crate) fn denies_exec(perms: PermSet) -> bool {
    perms.contains(Perm::Exec)
}
