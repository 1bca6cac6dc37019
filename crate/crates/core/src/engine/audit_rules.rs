//! Audit-log translators for capability, network and mount rules.
//!
//! Each translator keeps only `AUDIT` events reported by the named profile,
//! picks the events of its shape, and emits one rule per distinct key.

use std::collections::BTreeSet;

use crate::profile::{MountRule, Protocol, Rule};
use crate::trace::{AppArmorStatus, AuditPayload, AuditRecord};

fn audited<'a>(
    audits: &'a [AuditRecord],
    profile_name: &'a str,
) -> impl Iterator<Item = &'a AuditRecord> + 'a {
    audits
        .iter()
        .filter(move |a| a.status == AppArmorStatus::Audit && a.profile == profile_name)
}

/// `capability <capname>` for every distinct capability used.
pub fn translate_audit_capabilities(audits: &[AuditRecord], profile_name: &str) -> Vec<Rule> {
    audited(audits, profile_name)
        .filter(|a| a.operation == "capable")
        .filter_map(|a| match &a.payload {
            AuditPayload::Capability { capname, .. } => Some(capname.to_ascii_lowercase()),
            _ => None,
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|capname| Rule::Capability { capname })
        .collect()
}

/// `network <family> <sock_type> [<protocol>]` for every distinct
/// (family, sock_type, protocol) triple.
pub fn translate_audit_network(audits: &[AuditRecord], profile_name: &str) -> Vec<Rule> {
    audited(audits, profile_name)
        .filter_map(|a| match &a.payload {
            AuditPayload::Network(n) => Some((
                n.family.clone(),
                n.sock_type.clone(),
                Protocol::from_number(n.protocol),
            )),
            _ => None,
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|(family, sock_type, protocol)| Rule::Network {
            family,
            sock_type,
            protocol,
        })
        .collect()
}

/// `mount fstype=<fstype> options=<flags> <srcname> -> <name>` for every
/// distinct (fstype, sorted flags, srcname, name).
pub fn translate_audit_mounts(audits: &[AuditRecord], profile_name: &str) -> Vec<Rule> {
    let non_empty = |s: &str| Some(s.to_owned()).filter(|s| !s.is_empty());
    audited(audits, profile_name)
        .filter(|a| a.operation == "mount")
        .filter_map(|a| match &a.payload {
            AuditPayload::Mount(m) => {
                let flags = m.normalized_flags();
                Some(MountRule {
                    fstype: non_empty(&m.fstype),
                    options: (!flags.is_empty()).then_some(flags),
                    srcname: non_empty(&m.srcname),
                    target: non_empty(&m.name),
                })
            }
            _ => None,
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(Rule::Mount)
        .collect()
}
