use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perms::{Perm, PermSet};
use crate::profile::Protocol;

/// An operation a confined process asks the kernel to perform.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperationRequest {
    UseCapability {
        capname: String,
    },
    OpenSocket {
        family: String,
        sock_type: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        protocol: Option<Protocol>,
    },
    FileOp {
        path: String,
        perms: PermSet,
    },
    Exec {
        path: String,
    },
    DoMount {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fstype: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        options: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        srcname: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
    },
    DoPivotRoot {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        oldroot: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        newroot: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad request {input:?}: {reason}")]
pub struct RequestParseError {
    pub input: String,
    pub reason: String,
}

impl OperationRequest {
    pub fn validate(&self) -> Result<(), String> {
        let abs = |what: &str, p: &str| {
            if p.starts_with('/') {
                Ok(())
            } else {
                Err(format!("{what} {p:?} is not absolute"))
            }
        };
        match self {
            OperationRequest::UseCapability { capname } => {
                if capname.is_empty()
                    || !capname.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
                {
                    return Err(format!("capability name {capname:?} must match [a-z_]+"));
                }
            }
            OperationRequest::OpenSocket {
                family, sock_type, ..
            } => {
                if family.is_empty() || sock_type.is_empty() {
                    return Err("socket family and type are required".into());
                }
            }
            OperationRequest::FileOp { path, perms } => {
                abs("path", path)?;
                if perms.is_empty() || perms.contains(Perm::Exec) {
                    return Err("file operations request a non-empty subset of mrwkl".into());
                }
            }
            OperationRequest::Exec { path } => abs("path", path)?,
            OperationRequest::DoMount { target, .. } => {
                if let Some(t) = target {
                    abs("target", t)?;
                }
            }
            OperationRequest::DoPivotRoot { oldroot, newroot } => {
                for p in oldroot.iter().chain(newroot) {
                    abs("path", p)?;
                }
            }
        }
        Ok(())
    }
}

fn opt(s: &str) -> Option<String> {
    Some(s.to_owned()).filter(|s| !s.is_empty())
}

impl FromStr for OperationRequest {
    type Err = RequestParseError;

    /// Compact request syntax:
    ///
    /// ```text
    /// capability:<name>
    /// network:<family>:<sock_type>[:<protocol>]
    /// file:<path>:<perms>
    /// exec:<path>
    /// mount:<fstype>:<opt,opt>:<source>:<target>     (empty field = any)
    /// pivot_root:<oldroot>:<newroot>                 (empty field = any)
    /// ```
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| RequestParseError {
            input: s.to_owned(),
            reason: reason.to_owned(),
        };
        let (verb, rest) = s
            .split_once(':')
            .ok_or_else(|| err("expected <verb>:<args>"))?;
        let req = match verb {
            "capability" => OperationRequest::UseCapability {
                capname: rest.to_ascii_lowercase(),
            },
            "network" => {
                let parts: Vec<&str> = rest.split(':').collect();
                let (family, sock_type, protocol) = match parts.as_slice() {
                    [f, t] => (f, t, None),
                    [f, t, p] => (
                        f,
                        t,
                        Some(Protocol::from_name(p).ok_or_else(|| err("unknown protocol"))?),
                    ),
                    _ => return Err(err("expected network:<family>:<type>[:<protocol>]")),
                };
                OperationRequest::OpenSocket {
                    family: family.to_string(),
                    sock_type: sock_type.to_string(),
                    protocol,
                }
            }
            "file" => {
                let (path, perms) = rest
                    .rsplit_once(':')
                    .ok_or_else(|| err("expected file:<path>:<perms>"))?;
                OperationRequest::FileOp {
                    path: path.to_owned(),
                    perms: perms.parse().map_err(|_| err("bad permission letters"))?,
                }
            }
            "exec" => OperationRequest::Exec {
                path: rest.to_owned(),
            },
            "mount" => {
                let parts: Vec<&str> = rest.split(':').collect();
                let [fstype, options, src, target] = parts.as_slice() else {
                    return Err(err("expected mount:<fstype>:<options>:<source>:<target>"));
                };
                let mut opts: Vec<String> = options
                    .split(',')
                    .filter(|o| !o.is_empty())
                    .map(str::to_owned)
                    .collect();
                opts.sort();
                opts.dedup();
                OperationRequest::DoMount {
                    fstype: opt(fstype),
                    options: (!opts.is_empty()).then_some(opts),
                    srcname: opt(src),
                    target: opt(target),
                }
            }
            "pivot_root" => {
                let (old, new) = rest
                    .split_once(':')
                    .ok_or_else(|| err("expected pivot_root:<oldroot>:<newroot>"))?;
                OperationRequest::DoPivotRoot {
                    oldroot: opt(old),
                    newroot: opt(new),
                }
            }
            _ => return Err(err("unknown verb")),
        };
        req.validate().map_err(|r| err(&r))?;
        Ok(req)
    }
}

impl fmt::Display for OperationRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = |v: &Option<String>| v.clone().unwrap_or_default();
        match self {
            OperationRequest::UseCapability { capname } => write!(f, "capability:{capname}"),
            OperationRequest::OpenSocket {
                family,
                sock_type,
                protocol,
            } => {
                write!(f, "network:{family}:{sock_type}")?;
                if let Some(p) = protocol {
                    write!(f, ":{p}")?;
                }
                Ok(())
            }
            OperationRequest::FileOp { path, perms } => write!(f, "file:{path}:{perms}"),
            OperationRequest::Exec { path } => write!(f, "exec:{path}"),
            OperationRequest::DoMount {
                fstype,
                options,
                srcname,
                target,
            } => write!(
                f,
                "mount:{}:{}:{}:{}",
                o(fstype),
                options.as_deref().map(|v| v.join(",")).unwrap_or_default(),
                o(srcname),
                o(target)
            ),
            OperationRequest::DoPivotRoot { oldroot, newroot } => {
                write!(f, "pivot_root:{}:{}", o(oldroot), o(newroot))
            }
        }
    }
}
