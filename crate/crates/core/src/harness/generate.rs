//! Whole-pipeline profile generation over a session window.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::engine::{
    translate_audit_capabilities, translate_audit_mounts, translate_audit_network, translate_trace,
    EngineConfig, TranslateStats,
};
use crate::profile::{merge_profiles, Category, Layer, Profile, ProfileError, Rule};
use crate::trace::{AuditRecord, TraceRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerateOptions {
    /// Emit capability and network rules only, merged onto the base
    /// profiles, like the capability/network-only generators.
    pub docker_sec_compat: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerateSummary {
    pub trace: TranslateStats,
    /// Audit events that fed rules for the container / host profile.
    pub audits_used: usize,
    pub container_rules: BTreeMap<Category, usize>,
    pub host_rules: BTreeMap<Category, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub container: Profile,
    pub host: Profile,
    pub summary: GenerateSummary,
}

fn audit_rules(audits: &[AuditRecord], name: &str, with_mounts: bool) -> Vec<Rule> {
    let mut rules = translate_audit_capabilities(audits, name);
    rules.extend(translate_audit_network(audits, name));
    if with_mounts {
        rules.extend(translate_audit_mounts(audits, name));
    }
    rules
}

fn counts(p: &Profile) -> BTreeMap<Category, usize> {
    let mut m = BTreeMap::new();
    for r in p.rules() {
        *m.entry(r.category()).or_default() += 1;
    }
    m
}

fn seed(base: Option<&Profile>, name: &str, layer: Layer) -> Result<Profile, ProfileError> {
    match base {
        Some(b) if b.layer() != layer => Err(ProfileError::LayerMismatch {
            base: b.layer(),
            addition: layer,
        }),
        Some(b) => Ok(b.clone()),
        None => Profile::new(name, layer),
    }
}

/// Generate the container and host profiles for one window of a session.
///
/// Without the compat flag the trace is translated on top of the base
/// profiles and every audit translator adds its rules. With it, only
/// capability and network rules survive and are merged onto the bases.
pub fn generate(
    records: &[TraceRecord],
    audits: &[AuditRecord],
    cfg: &EngineConfig,
    base_container: Option<&Profile>,
    base_host: Option<&Profile>,
    opts: GenerateOptions,
) -> Result<Generated, ProfileError> {
    let c_name = base_container.map_or(cfg.profile_name.as_str(), |p| p.name());
    let h_name = base_host.map_or(cfg.host_profile_name.as_str(), |p| p.name());
    let used = audits
        .iter()
        .filter(|a| {
            a.status == crate::trace::AppArmorStatus::Audit
                && (a.profile == cfg.profile_name || a.profile == cfg.host_profile_name)
        })
        .count();

    let (container, host, trace) = if opts.docker_sec_compat {
        let t = translate_trace(
            records,
            cfg,
            Profile::new(c_name, Layer::Container)?,
            Profile::new(h_name, Layer::Host)?,
        );
        let keep = |r: &Rule| matches!(r, Rule::Capability { .. } | Rule::Network { .. });
        let (mut c, mut h) = (t.container, t.host);
        c.retain(keep);
        h.retain(keep);
        c.extend(audit_rules(audits, &cfg.profile_name, false))?;
        h.extend(audit_rules(audits, &cfg.host_profile_name, false))?;
        let c = match base_container {
            Some(b) => merge_profiles(&seed(Some(b), c_name, Layer::Container)?, &c)?,
            None => c,
        };
        let h = match base_host {
            Some(b) => merge_profiles(&seed(Some(b), h_name, Layer::Host)?, &h)?,
            None => h,
        };
        (c, h, t.stats)
    } else {
        let t = translate_trace(
            records,
            cfg,
            seed(base_container, c_name, Layer::Container)?,
            seed(base_host, h_name, Layer::Host)?,
        );
        let (mut c, mut h) = (t.container, t.host);
        c.extend(audit_rules(audits, &cfg.profile_name, true))?;
        h.extend(audit_rules(audits, &cfg.host_profile_name, true))?;
        (c, h, t.stats)
    };

    let summary = GenerateSummary {
        trace,
        audits_used: used,
        container_rules: counts(&container),
        host_rules: counts(&host),
    };
    Ok(Generated {
        container,
        host,
        summary,
    })
}

impl fmt::Display for GenerateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.trace;
        let mut line = String::new();
        for (kind, n) in &t.built {
            let _ = write!(line, " {kind}={n}");
        }
        writeln!(f, "records: {}  built:{}", t.records, line)?;
        writeln!(
            f,
            "skipped: {} (no dispatch {}, missing resource {}, invalid {})",
            t.skipped(),
            t.no_dispatch,
            t.missing_resource,
            t.invalid
        )?;
        writeln!(f, "audit events used: {}", self.audits_used)?;
        writeln!(
            f,
            "deny-shell: {}",
            if t.deny_shell_added {
                "added"
            } else {
                "not added"
            }
        )?;
        for (label, m) in [
            ("container", &self.container_rules),
            ("host", &self.host_rules),
        ] {
            let total: usize = m.values().sum();
            write!(f, "{label}: {total} rules")?;
            for (c, n) in m {
                write!(f, " {}={n}", c.as_str())?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
