//! AppArmor profile model: rules, profiles, the text form they render to and
//! parse from, and profile merging.

mod parse;
mod rule;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perms::Perm;

pub use parse::{parse_profile, ParseError};
pub use rule::{Category, MountRule, Protocol, Rule};

/// Which profile a rule belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Container,
    Host,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Container => "container",
            Layer::Host => "host",
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Layer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "container" => Ok(Layer::Container),
            "host" => Ok(Layer::Host),
            other => Err(format!("unknown layer {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("invalid profile name {0:?}")]
    InvalidName(String),
    #[error("invalid profile flag {0:?}")]
    InvalidFlag(String),
    #[error("invalid rule `{rule}`: {reason}")]
    InvalidRule { rule: String, reason: String },
    #[error("cannot merge {base} profile with {addition} profile")]
    LayerMismatch { base: Layer, addition: Layer },
    #[error("cannot merge profile {base:?} with {addition:?}")]
    NameMismatch { base: String, addition: String },
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
}

fn valid_flag(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'='))
}

/// A named, deduplicated rule set for one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    name: String,
    layer: Layer,
    rules: BTreeSet<Rule>,
    flags: BTreeSet<String>,
}

impl Profile {
    pub fn new(name: impl Into<String>, layer: Layer) -> Result<Self, ProfileError> {
        let name = name.into();
        if !valid_name(&name) {
            return Err(ProfileError::InvalidName(name));
        }
        Ok(Profile {
            name,
            layer,
            rules: BTreeSet::new(),
            flags: BTreeSet::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layer(&self) -> Layer {
        self.layer
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn contains(&self, rule: &Rule) -> bool {
        self.rules.contains(&rule.clone().normalized())
    }

    pub fn flags(&self) -> impl Iterator<Item = &str> {
        self.flags.iter().map(String::as_str)
    }

    pub fn add_flag(&mut self, flag: impl Into<String>) -> Result<(), ProfileError> {
        let flag = flag.into();
        if !valid_flag(&flag) {
            return Err(ProfileError::InvalidFlag(flag));
        }
        self.flags.insert(flag);
        Ok(())
    }

    /// Insert a rule after normalizing it. Returns false when it was
    /// already present.
    pub fn insert(&mut self, rule: Rule) -> Result<bool, ProfileError> {
        let rule = rule.normalized();
        rule.validate()
            .map_err(|reason| ProfileError::InvalidRule {
                rule: rule.to_string(),
                reason,
            })?;
        Ok(self.rules.insert(rule))
    }

    pub fn extend<I: IntoIterator<Item = Rule>>(&mut self, rules: I) -> Result<(), ProfileError> {
        for r in rules {
            self.insert(r)?;
        }
        Ok(())
    }

    pub fn retain(&mut self, f: impl FnMut(&Rule) -> bool) {
        self.rules.retain(f);
    }

    /// Copy with the same name, layer and flags but no rules.
    pub fn empty_like(&self) -> Profile {
        Profile {
            name: self.name.clone(),
            layer: self.layer,
            rules: BTreeSet::new(),
            flags: self.flags.clone(),
        }
    }

    pub fn render(&self) -> String {
        render_profile(self)
    }
}

/// Render a profile in the deterministic text form: header, rules grouped by
/// category (capability, network, mount, pivot_root, link, file, deny) and
/// sorted within each group, then the closing brace.
pub fn render_profile(p: &Profile) -> String {
    let mut lines: Vec<(Category, String)> = p
        .rules
        .iter()
        .map(|r| (r.category(), r.to_string()))
        .collect();
    lines.sort();

    let mut out = format!("profile {}", p.name);
    if !p.flags.is_empty() {
        out.push_str(" flags=(");
        out.push_str(&p.flags.iter().cloned().collect::<Vec<_>>().join(","));
        out.push(')');
    }
    out.push_str(" {\n");
    for (_, line) in lines {
        out.push_str("  ");
        out.push_str(&line);
        out.push_str(",\n");
    }
    out.push_str("}\n");
    out
}

/// Union of two profiles of the same name and layer.
///
/// After the union, a deny rule covering `x` is dropped when the merged set
/// also grants execution of the same path: a later trace that observed the
/// execution supersedes the denial recorded when it had not been seen. The
/// result depends only on the union, so merging is commutative and
/// associative.
pub fn merge_profiles(base: &Profile, addition: &Profile) -> Result<Profile, ProfileError> {
    if base.layer != addition.layer {
        return Err(ProfileError::LayerMismatch {
            base: base.layer,
            addition: addition.layer,
        });
    }
    if base.name != addition.name {
        return Err(ProfileError::NameMismatch {
            base: base.name.clone(),
            addition: addition.name.clone(),
        });
    }
    let mut merged = base.clone();
    merged.rules.extend(addition.rules.iter().cloned());
    merged.flags.extend(addition.flags.iter().cloned());
    drop_superseded_denies(&mut merged);
    Ok(merged)
}

pub(crate) fn drop_superseded_denies(p: &mut Profile) {
    let executed: BTreeSet<String> = p
        .rules
        .iter()
        .filter_map(|r| match r {
            Rule::Execution { path } => Some(path.clone()),
            _ => None,
        })
        .collect();
    if executed.is_empty() {
        return;
    }
    p.rules.retain(|r| match r {
        Rule::Deny { path, perms } => !(perms.contains(Perm::Exec) && executed.contains(path)),
        _ => true,
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perms::PermSet;
    use proptest::prelude::*;

    fn deny(path: &str) -> Rule {
        Rule::Deny {
            path: path.into(),
            perms: PermSet::ALL,
        }
    }

    fn exec(path: &str) -> Rule {
        Rule::Execution { path: path.into() }
    }

    #[test]
    fn empty_profile_renders_header_only() {
        let p = Profile::new("p0", Layer::Container).unwrap();
        assert_eq!(render_profile(&p), "profile p0 {\n}\n");
    }

    #[test]
    fn capability_line() {
        let mut p = Profile::new("c", Layer::Container).unwrap();
        p.insert(Rule::Capability {
            capname: "setuid".into(),
        })
        .unwrap();
        assert!(p.render().contains("\n  capability setuid,\n"));
    }

    #[test]
    fn category_order() {
        let mut p = Profile::new("c", Layer::Container).unwrap();
        p.extend([
            deny("/bin/sh"),
            exec("/usr/bin/a"),
            Rule::FileAccess {
                path: "/etc/a".into(),
                perms: "r".parse().unwrap(),
            },
            Rule::Link {
                src: "/a".into(),
                dst: "/b".into(),
            },
            Rule::PivotRoot {
                oldroot: None,
                newroot: Some("/n".into()),
            },
            Rule::Mount(MountRule {
                target: Some("/m".into()),
                ..Default::default()
            }),
            Rule::Network {
                family: "inet".into(),
                sock_type: "stream".into(),
                protocol: None,
            },
            Rule::Capability {
                capname: "chown".into(),
            },
        ])
        .unwrap();
        p.add_flag("attach_disconnected").unwrap();
        assert_eq!(
            p.render(),
            "profile c flags=(attach_disconnected) {\n  capability chown,\n  network inet stream,\n  mount -> /m,\n  pivot_root /n,\n  link /a -> /b,\n  /etc/a r,\n  /usr/bin/a ix,\n  deny /bin/sh mrwklx,\n}\n"
        );
    }

    #[test]
    fn invalid_name() {
        assert!(Profile::new("bad name", Layer::Host).is_err());
        assert!(Profile::new("", Layer::Host).is_err());
    }

    #[test]
    fn normalization_dedups() {
        let mut p = Profile::new("c", Layer::Container).unwrap();
        assert!(p
            .insert(Rule::Mount(MountRule {
                options: Some(vec!["ro".into(), "nosuid".into()]),
                ..Default::default()
            }))
            .unwrap());
        assert!(!p
            .insert(Rule::Mount(MountRule {
                options: Some(vec!["nosuid".into(), "ro".into(), "ro".into()]),
                ..Default::default()
            }))
            .unwrap());
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn merge_identity_and_idempotence() {
        let mut p = Profile::new("c", Layer::Container).unwrap();
        p.extend([deny("/bin/sh"), exec("/usr/bin/a")]).unwrap();
        let empty = Profile::new("c", Layer::Container).unwrap();
        assert_eq!(merge_profiles(&p, &empty).unwrap(), p);
        assert_eq!(merge_profiles(&p, &p).unwrap(), p);
    }

    #[test]
    fn merge_drops_superseded_shell_deny() {
        let mut base = Profile::new("c", Layer::Container).unwrap();
        base.extend([deny("/bin/sh"), deny("/bin/bash")]).unwrap();
        let mut add = Profile::new("c", Layer::Container).unwrap();
        add.insert(exec("/bin/sh")).unwrap();
        let m = merge_profiles(&base, &add).unwrap();
        assert!(!m.contains(&deny("/bin/sh")));
        assert!(m.contains(&deny("/bin/bash")));
        assert!(m.contains(&exec("/bin/sh")));
        assert_eq!(merge_profiles(&add, &base).unwrap(), m);
    }

    #[test]
    fn merge_mismatches() {
        let a = Profile::new("c", Layer::Container).unwrap();
        let b = Profile::new("c", Layer::Host).unwrap();
        let c = Profile::new("d", Layer::Container).unwrap();
        assert!(matches!(
            merge_profiles(&a, &b),
            Err(ProfileError::LayerMismatch { .. })
        ));
        assert!(matches!(
            merge_profiles(&a, &c),
            Err(ProfileError::NameMismatch { .. })
        ));
    }

    fn small_rule() -> impl Strategy<Value = Rule> {
        let path = prop::sample::select(vec!["/bin/sh", "/bin/bash", "/a", "/b"]);
        prop_oneof![
            path.clone().prop_map(deny),
            path.clone().prop_map(exec),
            prop::sample::select(vec!["chown", "setuid"])
                .prop_map(|c| Rule::Capability { capname: c.into() }),
            path.prop_map(|p| Rule::FileAccess {
                path: p.into(),
                perms: "r".parse().unwrap()
            }),
        ]
    }

    fn profile_of(rules: Vec<Rule>) -> Profile {
        let mut p = Profile::new("c", Layer::Container).unwrap();
        p.extend(rules).unwrap();
        p
    }

    proptest! {
        #[test]
        fn merge_commutative_associative(
            a in prop::collection::vec(small_rule(), 0..6),
            b in prop::collection::vec(small_rule(), 0..6),
            c in prop::collection::vec(small_rule(), 0..6),
        ) {
            let (a, b, c) = (profile_of(a), profile_of(b), profile_of(c));
            prop_assert_eq!(merge_profiles(&a, &b).unwrap(), merge_profiles(&b, &a).unwrap());
            let left = merge_profiles(&merge_profiles(&a, &b).unwrap(), &c).unwrap();
            let right = merge_profiles(&a, &merge_profiles(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }
    }
}
