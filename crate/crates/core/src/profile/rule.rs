use std::fmt;

use serde::{Deserialize, Serialize};

use crate::perms::{Perm, PermSet};

/// Named IP protocols that can appear in a network rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
            Protocol::Icmp => "icmp",
        }
    }

    pub fn from_name(s: &str) -> Option<Protocol> {
        match s {
            "tcp" => Some(Protocol::Tcp),
            "udp" => Some(Protocol::Udp),
            "icmp" => Some(Protocol::Icmp),
            _ => None,
        }
    }

    /// IANA protocol number to name. `0` (unspecified) and anything
    /// unrecognized map to `None`, i.e. a rule without a protocol.
    pub fn from_number(n: u32) -> Option<Protocol> {
        match n {
            1 => Some(Protocol::Icmp),
            6 => Some(Protocol::Tcp),
            17 => Some(Protocol::Udp),
            _ => None,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mount grant. Absent fields are unconstrained.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MountRule {
    pub fstype: Option<String>,
    /// Sorted, deduplicated flag names.
    pub options: Option<Vec<String>>,
    pub srcname: Option<String>,
    pub target: Option<String>,
}

impl MountRule {
    /// Sort and deduplicate options; an empty option list becomes `None`.
    pub fn normalized(mut self) -> Self {
        if let Some(opts) = &mut self.options {
            opts.sort();
            opts.dedup();
            if opts.is_empty() {
                self.options = None;
            }
        }
        self
    }
}

/// One profile rule.
///
/// Execution grants are inherit-execute (`ix`); denying execution is
/// expressed with [`Rule::Deny`] carrying `x`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Capability {
        capname: String,
    },
    Network {
        family: String,
        sock_type: String,
        protocol: Option<Protocol>,
    },
    Mount(MountRule),
    PivotRoot {
        oldroot: Option<String>,
        newroot: Option<String>,
    },
    Link {
        src: String,
        dst: String,
    },
    FileAccess {
        path: String,
        perms: PermSet,
    },
    Execution {
        path: String,
    },
    Deny {
        path: String,
        perms: PermSet,
    },
}

/// Render groups, in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Capability,
    Network,
    Mount,
    PivotRoot,
    Link,
    File,
    Deny,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Capability => "capability",
            Category::Network => "network",
            Category::Mount => "mount",
            Category::PivotRoot => "pivot_root",
            Category::Link => "link",
            Category::File => "file",
            Category::Deny => "deny",
        }
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

fn is_option(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.' | b'=' | b'/'))
}

/// A printable token: no quotes, no control characters.
fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c == '"' || c.is_control())
}

fn check_path(what: &str, p: &str) -> Result<(), String> {
    if !p.starts_with('/') {
        return Err(format!("{what} {p:?} is not absolute"));
    }
    if !is_token(p) {
        return Err(format!(
            "{what} {p:?} contains a quote or control character"
        ));
    }
    Ok(())
}

impl Rule {
    pub fn category(&self) -> Category {
        match self {
            Rule::Capability { .. } => Category::Capability,
            Rule::Network { .. } => Category::Network,
            Rule::Mount(_) => Category::Mount,
            Rule::PivotRoot { .. } => Category::PivotRoot,
            Rule::Link { .. } => Category::Link,
            Rule::FileAccess { .. } | Rule::Execution { .. } => Category::File,
            Rule::Deny { .. } => Category::Deny,
        }
    }

    /// Canonical form used for deduplication.
    pub fn normalized(self) -> Rule {
        match self {
            Rule::Capability { capname } => Rule::Capability {
                capname: capname.to_ascii_lowercase(),
            },
            Rule::Mount(m) => Rule::Mount(m.normalized()),
            other => other,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Rule::Capability { capname } => {
                if capname.is_empty()
                    || !capname.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
                {
                    return Err(format!("capability name {capname:?} must match [a-z_]+"));
                }
            }
            Rule::Network {
                family, sock_type, ..
            } => {
                if !is_ident(family) || !is_ident(sock_type) {
                    return Err(format!("bad network family/type {family:?} {sock_type:?}"));
                }
            }
            Rule::Mount(m) => {
                if let Some(t) = &m.fstype {
                    if !is_ident(t) {
                        return Err(format!("bad fstype {t:?}"));
                    }
                }
                if let Some(opts) = &m.options {
                    if opts.is_empty() || !opts.iter().all(|o| is_option(o)) {
                        return Err(format!("bad mount options {opts:?}"));
                    }
                    if opts.windows(2).any(|w| w[0] >= w[1]) {
                        return Err("mount options not sorted".into());
                    }
                }
                if let Some(s) = &m.srcname {
                    if !is_token(s) || s == "->" || s.contains('=') {
                        return Err(format!("bad mount source {s:?}"));
                    }
                }
                if let Some(t) = &m.target {
                    check_path("mount target", t)?;
                }
            }
            Rule::PivotRoot { oldroot, newroot } => {
                if let Some(p) = oldroot {
                    check_path("oldroot", p)?;
                }
                if let Some(p) = newroot {
                    check_path("new root", p)?;
                }
            }
            Rule::Link { src, dst } => {
                check_path("link source", src)?;
                check_path("link target", dst)?;
            }
            Rule::FileAccess { path, perms } => {
                check_path("path", path)?;
                if perms.is_empty() {
                    return Err("file rule without permissions".into());
                }
                if perms.contains(Perm::Exec) {
                    return Err("bare x is not allowed in an allow rule".into());
                }
            }
            Rule::Execution { path } => check_path("path", path)?,
            Rule::Deny { path, perms } => {
                check_path("path", path)?;
                if perms.is_empty() {
                    return Err("deny rule without permissions".into());
                }
            }
        }
        Ok(())
    }
}

/// Quote a path when it contains whitespace or a comma.
pub(crate) fn fmt_token(s: &str) -> String {
    if s.chars()
        .any(|c| c.is_whitespace() || c == ',' || c == '(' || c == ')')
    {
        format!("\"{s}\"")
    } else {
        s.to_owned()
    }
}

impl fmt::Display for Rule {
    /// The rule body, without indentation or the terminating comma.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Capability { capname } => write!(f, "capability {capname}"),
            Rule::Network {
                family,
                sock_type,
                protocol,
            } => {
                write!(f, "network {family} {sock_type}")?;
                if let Some(p) = protocol {
                    write!(f, " {p}")?;
                }
                Ok(())
            }
            Rule::Mount(m) => {
                f.write_str("mount")?;
                if let Some(t) = &m.fstype {
                    write!(f, " fstype={t}")?;
                }
                if let Some(opts) = &m.options {
                    if opts.len() == 1 {
                        write!(f, " options={}", opts[0])?;
                    } else {
                        write!(f, " options=({})", opts.join(","))?;
                    }
                }
                if let Some(s) = &m.srcname {
                    write!(f, " {}", fmt_token(s))?;
                }
                if let Some(t) = &m.target {
                    write!(f, " -> {}", fmt_token(t))?;
                }
                Ok(())
            }
            Rule::PivotRoot { oldroot, newroot } => {
                f.write_str("pivot_root")?;
                if let Some(o) = oldroot {
                    write!(f, " oldroot={}", fmt_token(o))?;
                }
                if let Some(n) = newroot {
                    write!(f, " {}", fmt_token(n))?;
                }
                Ok(())
            }
            Rule::Link { src, dst } => {
                write!(f, "link {} -> {}", fmt_token(src), fmt_token(dst))
            }
            Rule::FileAccess { path, perms } => write!(f, "{} {perms}", fmt_token(path)),
            Rule::Execution { path } => write!(f, "{} ix", fmt_token(path)),
            Rule::Deny { path, perms } => write!(f, "deny {} {perms}", fmt_token(path)),
        }
    }
}
