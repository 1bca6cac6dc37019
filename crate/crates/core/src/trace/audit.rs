use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::TraceError;

/// Value of the `apparmor=` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AppArmorStatus {
    Deny,
    Allow,
    Status,
    /// Only `AUDIT` records feed rule generation.
    Audit,
}

impl AppArmorStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AppArmorStatus::Deny => "DENY",
            AppArmorStatus::Allow => "ALLOW",
            AppArmorStatus::Status => "STATUS",
            AppArmorStatus::Audit => "AUDIT",
        }
    }
}

impl FromStr for AppArmorStatus {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "DENY" | "DENIED" => Ok(AppArmorStatus::Deny),
            "ALLOW" | "ALLOWED" => Ok(AppArmorStatus::Allow),
            "STATUS" => Ok(AppArmorStatus::Status),
            "AUDIT" => Ok(AppArmorStatus::Audit),
            other => Err(TraceError::InvalidValue {
                key: "apparmor".into(),
                value: other.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkPayload {
    pub family: String,
    pub sock_type: String,
    /// Raw protocol number; mapped to a name only when rendering rules.
    pub protocol: u32,
    pub requested_mask: String,
    pub addr: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MountPayload {
    /// Mount target.
    pub name: String,
    pub fstype: String,
    pub srcname: String,
    /// Mount flags exactly as logged, comma-joined.
    pub flags: String,
    pub options: String,
}

impl MountPayload {
    /// Flags split on commas, empty entries dropped, sorted and deduplicated.
    pub fn normalized_flags(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .flags
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect();
        v.sort();
        v.dedup();
        v
    }
}

/// Shape-specific part of an audit event, selected by `operation`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AuditPayload {
    Capability { capability: u32, capname: String },
    Network(NetworkPayload),
    Mount(MountPayload),
}

/// One AppArmor audit event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AuditRecord {
    pub status: AppArmorStatus,
    pub operation: String,
    pub profile: String,
    pub pid: u32,
    pub comm: String,
    pub payload: AuditPayload,
    /// Keys present on the line that no shape uses (`type=`, `msg=`, ...).
    pub ignored_keys: usize,
}

impl AuditRecord {
    pub fn capname(&self) -> Option<&str> {
        match &self.payload {
            AuditPayload::Capability { capname, .. } => Some(capname),
            _ => None,
        }
    }

    pub fn render_line(&self) -> String {
        self.to_string()
    }
}

fn is_capname(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
}

/// Split a line into `key=value` pairs. Values may be double-quoted, in
/// which case they can contain spaces; the quotes are not part of the value.
fn tokenize(line: &str) -> Result<Vec<(&str, &str)>, TraceError> {
    let mut out = Vec::new();
    let mut rest = line.trim_start();
    while !rest.is_empty() {
        let eq = rest
            .find('=')
            .ok_or_else(|| TraceError::malformed(format!("token without '=': {rest:?}")))?;
        let key = &rest[..eq];
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
            return Err(TraceError::malformed(format!("bad key {key:?}")));
        }
        let after = &rest[eq + 1..];
        let (value, tail) = if let Some(quoted) = after.strip_prefix('"') {
            let close = quoted
                .find('"')
                .ok_or_else(|| TraceError::malformed(format!("unterminated quote after {key}=")))?;
            let tail = &quoted[close + 1..];
            if !(tail.is_empty() || tail.starts_with(' ')) {
                return Err(TraceError::malformed(format!(
                    "garbage after quoted value of {key}"
                )));
            }
            (&quoted[..close], tail)
        } else {
            let end = after.find(' ').unwrap_or(after.len());
            let value = &after[..end];
            if value.contains('"') {
                return Err(TraceError::malformed(format!(
                    "stray quote in value of {key}"
                )));
            }
            (value, &after[end..])
        };
        out.push((key, value));
        rest = tail.trim_start();
    }
    Ok(out)
}

struct Fields<'a> {
    map: HashMap<&'a str, &'a str>,
    used: usize,
}

impl<'a> Fields<'a> {
    fn get(&mut self, key: &str) -> Option<&'a str> {
        let v = self.map.get(key).copied();
        if v.is_some() {
            self.used += 1;
        }
        v
    }

    fn req(&mut self, key: &str) -> Result<&'a str, TraceError> {
        self.get(key)
            .ok_or_else(|| TraceError::MissingKey(key.into()))
    }

    fn req_u32(&mut self, key: &str) -> Result<u32, TraceError> {
        let v = self.req(key)?;
        v.parse().map_err(|_| TraceError::InvalidValue {
            key: key.into(),
            value: v.into(),
        })
    }
}

/// Parse one `key=value` audit event line.
///
/// The payload shape follows `operation`: `capable` is a capability event,
/// `mount` a mount event, and anything else a network event.
pub fn parse_audit_line(line: &str) -> Result<AuditRecord, TraceError> {
    let line = line.trim_end_matches(['\n', '\r']);
    if line.trim().is_empty() {
        return Err(TraceError::malformed("empty line"));
    }
    let tokens = tokenize(line)?;
    let mut map = HashMap::with_capacity(tokens.len());
    for (k, v) in &tokens {
        if map.insert(*k, *v).is_some() {
            return Err(TraceError::malformed(format!("duplicate key {k}")));
        }
    }
    let mut f = Fields { map, used: 0 };

    let status: AppArmorStatus = f.req("apparmor")?.parse()?;
    let operation = f.req("operation")?.to_owned();
    let profile = f.req("profile")?.to_owned();
    let pid = f.req_u32("pid")?;
    if pid == 0 {
        return Err(TraceError::InvalidValue {
            key: "pid".into(),
            value: "0".into(),
        });
    }
    let comm = f.req("comm")?.to_owned();

    let payload = match operation.as_str() {
        "capable" => {
            let capability = f.req_u32("capability")?;
            let capname = f.req("capname")?.to_ascii_lowercase();
            if !is_capname(&capname) {
                return Err(TraceError::InvalidValue {
                    key: "capname".into(),
                    value: capname,
                });
            }
            AuditPayload::Capability {
                capability,
                capname,
            }
        }
        "mount" => AuditPayload::Mount(MountPayload {
            name: f.req("name")?.to_owned(),
            fstype: f.req("fstype")?.to_owned(),
            srcname: f.req("srcname")?.to_owned(),
            flags: f.req("flags")?.to_owned(),
            options: f.req("options")?.to_owned(),
        }),
        _ => {
            let (Some(family), Some(sock_type)) = (f.get("family"), f.get("sock_type")) else {
                return Err(TraceError::UnknownOperationShape { operation });
            };
            AuditPayload::Network(NetworkPayload {
                family: family.to_owned(),
                sock_type: sock_type.to_owned(),
                protocol: f.req_u32("protocol")?,
                requested_mask: f.req("requested_mask")?.to_owned(),
                addr: f.get("addr").map(str::to_owned),
            })
        }
    };

    Ok(AuditRecord {
        status,
        operation,
        profile,
        pid,
        comm,
        payload,
        ignored_keys: tokens.len() - f.used,
    })
}

/// Inverse of [`parse_audit_line`] for records with no ignored keys.
pub fn render_audit_line(rec: &AuditRecord) -> String {
    rec.render_line()
}

impl fmt::Display for AuditRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write!(
            s,
            "apparmor=\"{}\" operation=\"{}\" profile=\"{}\"",
            self.status.as_str(),
            self.operation,
            self.profile
        )?;
        if let AuditPayload::Mount(m) = &self.payload {
            write!(s, " name=\"{}\"", m.name)?;
        }
        write!(s, " pid={} comm=\"{}\"", self.pid, self.comm)?;
        match &self.payload {
            AuditPayload::Capability {
                capability,
                capname,
            } => {
                write!(s, " capability={capability} capname=\"{capname}\"")?;
            }
            AuditPayload::Network(n) => {
                write!(
                    s,
                    " family=\"{}\" sock_type=\"{}\" protocol={} requested_mask=\"{}\"",
                    n.family, n.sock_type, n.protocol, n.requested_mask
                )?;
                if let Some(addr) = &n.addr {
                    write!(s, " addr=\"{addr}\"")?;
                }
            }
            AuditPayload::Mount(m) => {
                write!(
                    s,
                    " fstype=\"{}\" srcname=\"{}\" flags=\"{}\" options=\"{}\"",
                    m.fstype, m.srcname, m.flags, m.options
                )?;
            }
        }
        f.write_str(&s)
    }
}
