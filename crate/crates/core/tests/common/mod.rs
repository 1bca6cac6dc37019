//! Shared test support: fixture paths, random session and profile
//! generators, and straightforward reference implementations used as
//! oracles.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use aagen_core::perms::PermSet;
use aagen_core::profile::{Layer, MountRule, Profile, Protocol, Rule};
use aagen_core::sim::OperationRequest;
use aagen_core::trace::{parse_audit_line, parse_trace_line, AuditRecord, TraceRecord};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub const SHELLS: [&str; 3] = ["/bin/bash", "/bin/sh", "/bin/dash"];

// ---------------------------------------------------------------------------
// Random kernel traces

/// Raw six-field record, kept as strings so the reference interpreter never
/// touches library types.
#[derive(Debug, Clone)]
pub struct RawRecord {
    pub probe: String,
    pub cgroup: String,
    pub name: String,
    pub exec_path: String,
    pub resource: String,
    pub root: String,
}

impl RawRecord {
    pub fn line(&self) -> String {
        [
            &self.probe,
            &self.cgroup,
            &self.name,
            &self.exec_path,
            &self.resource,
            &self.root,
        ]
        .map(|s| s.as_str())
        .join("\t")
    }

    pub fn parse(&self) -> TraceRecord {
        parse_trace_line(&self.line()).expect("generated record is valid")
    }
}

const PROBES: &[&str] = &[
    "security_file_open",
    "security_file_permission:write",
    "security_file_permission:read",
    "security_mmap_file",
    "security_file_lock",
    "security_path_link",
    "security_sb_mount",
    "security_sb_pivotroot",
    "security_inode_getattr",
    "kprocess.exec",
    "kprocess.exec",
    "kprocess.exit",
];
const CGROUPS: &[&str] = &[
    "-",
    "/docker/4be1c0",
    "/docker/77aa01/init",
    "/system.slice/docker.service",
    "/user.slice/user-1000.slice",
    "/kubepods/docker-x",
];
const ROOTS: &[&str] = &[
    "-",
    "/",
    "/var/lib/docker/overlay2/f00/merged",
    "/var/lib/other",
];
const EXEC_PATHS: &[&str] = &["-", "/usr/bin/app", "/bin/sh", "/usr/sbin/nginx"];
const RESOURCES: &[&str] = &[
    "-",
    "/etc/hosts",
    "/etc/passwd",
    "/usr/bin/app",
    "/usr/sbin/nginx",
    "/var/log/app.log",
    "/tmp/x",
    "/mnt/data",
    "/new/root",
];
const NAMES: &[&str] = &["app", "nginx", "sh", "runc", "dockerd"];

/// A random session of up to `max_len` records. `shell_bias` is the chance
/// that a record is a shell execution.
pub fn random_records<R: Rng>(rng: &mut R, max_len: usize, shell_bias: f64) -> Vec<RawRecord> {
    let n = rng.gen_range(0..=max_len);
    (0..n)
        .map(|_| {
            let pick = |rng: &mut R, xs: &[&str]| xs.choose(rng).unwrap().to_string();
            if rng.gen_bool(shell_bias) {
                return RawRecord {
                    probe: "kprocess.exec".into(),
                    cgroup: pick(rng, CGROUPS),
                    name: "sh".into(),
                    exec_path: pick(rng, EXEC_PATHS),
                    resource: pick(rng, &SHELLS),
                    root: pick(rng, ROOTS),
                };
            }
            RawRecord {
                probe: pick(rng, PROBES),
                cgroup: pick(rng, CGROUPS),
                name: pick(rng, NAMES),
                exec_path: pick(rng, EXEC_PATHS),
                resource: pick(rng, RESOURCES),
                root: pick(rng, ROOTS),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Reference trace interpreter

/// Dispatch entry in raw form: (pattern, kind, mask letters).
pub type RawEntry = (&'static str, &'static str, &'static str);

pub const DEFAULT_TABLE: &[RawEntry] = &[
    ("security_sb_pivotroot", "pivot_root", ""),
    ("security_sb_mount", "mount", ""),
    ("security_path_link", "link", ""),
    ("security_file_open", "file_access", "r"),
    ("security_file_permission:write", "file_access", "w"),
    ("security_mmap_file", "file_access", "m"),
    ("security_file_lock", "file_access", "k"),
    ("kprocess.exec", "execution", "x"),
];

/// Same kinds, but with a catch-all glob at the end and a reordered prefix.
pub const GLOB_TABLE: &[RawEntry] = &[
    ("kprocess.exec", "execution", "x"),
    ("security_file_permission:write", "file_access", "wk"),
    ("security_sb_pivotroot", "pivot_root", ""),
    ("security_sb_*", "mount", ""),
    ("security_path_link", "link", ""),
    ("security_file_*", "file_access", "r"),
];

pub fn table_json(t: &[RawEntry]) -> String {
    let items: Vec<String> = t
        .iter()
        .map(|(p, k, m)| format!(r#"{{"pattern":"{p}","kind":"{k}","mask":"{m}"}}"#))
        .collect();
    format!("[{}]", items.join(","))
}

fn glob_match(pattern: &str, probe: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => probe.starts_with(prefix),
        None => pattern == probe,
    }
}

fn canonical_perms(mask: &str) -> String {
    "mrwklx".chars().filter(|c| mask.contains(*c)).collect()
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Reference {
    pub container: BTreeSet<String>,
    pub host: BTreeSet<String>,
    pub skipped: usize,
    pub deny_shell: bool,
}

/// Literal reading of the translation procedure, producing rule bodies as
/// text.
pub fn reference_translate(records: &[RawRecord], table: &[RawEntry]) -> Reference {
    let mut out = Reference::default();
    let mut saw_shell = false;
    for r in records {
        let Some((_, kind, mask)) = table.iter().find(|(p, _, _)| glob_match(p, &r.probe)) else {
            out.skipped += 1;
            continue;
        };
        let container = if r.cgroup != "-" {
            r.cgroup.contains("/docker/")
        } else {
            r.root.starts_with("/var/lib/docker/overlay2/")
        };
        if r.resource == "-" {
            out.skipped += 1;
            continue;
        }
        let rule = match *kind {
            "file_access" => format!("{} {}", r.resource, canonical_perms(mask)),
            "execution" => format!("{} ix", r.resource),
            "link" => {
                if r.exec_path == "-" {
                    out.skipped += 1;
                    continue;
                }
                format!("link {} -> {}", r.exec_path, r.resource)
            }
            "mount" => format!("mount -> {}", r.resource),
            "pivot_root" => {
                if r.root == "-" {
                    format!("pivot_root {}", r.resource)
                } else {
                    format!("pivot_root oldroot={} {}", r.root, r.resource)
                }
            }
            other => panic!("unexpected kind {other}"),
        };
        if *kind == "execution" && container && SHELLS.contains(&r.resource.as_str()) {
            saw_shell = true;
        }
        if container {
            out.container.insert(rule);
        } else {
            out.host.insert(rule);
        }
    }
    if !saw_shell {
        out.deny_shell = true;
        for s in SHELLS {
            out.container.insert(format!("deny {s} mrwklx"));
        }
    }
    out
}

pub fn rule_texts(p: &Profile) -> BTreeSet<String> {
    p.rules().map(|r| r.to_string()).collect()
}

// ---------------------------------------------------------------------------
// Random audit logs

pub fn cap_audit(profile: &str, capname: &str, num: u32) -> AuditRecord {
    parse_audit_line(&format!(
        r#"apparmor="AUDIT" operation="capable" profile="{profile}" pid=77 comm="x" capability={num} capname="{capname}""#
    ))
    .unwrap()
}

pub fn net_audit(profile: &str, family: &str, sock_type: &str, protocol: u32) -> AuditRecord {
    parse_audit_line(&format!(
        r#"apparmor="AUDIT" operation="create" profile="{profile}" pid=77 comm="x" family="{family}" sock_type="{sock_type}" protocol={protocol} requested_mask="create""#
    ))
    .unwrap()
}

// ---------------------------------------------------------------------------
// Random profiles and requests

const CAPS: &[&str] = &[
    "chown",
    "net_raw",
    "sys_admin",
    "net_admin",
    "setuid",
    "mknod",
];
const FAMILIES: &[&str] = &["inet", "inet6", "unix", "netlink", "packet"];
const TYPES: &[&str] = &["stream", "dgram", "raw", "dccp"];
const PATHS: &[&str] = &[
    "/bin/sh",
    "/bin/bash",
    "/etc/hosts",
    "/etc/shadow",
    "/usr/bin/app",
    "/tmp/x",
    "/srv/my data/file",
];
const FSTYPES: &[&str] = &["ext4", "overlay", "proc", "tmpfs"];
const OPTS: &[&str] = &["ro", "rw", "nosuid", "nodev", "mode=755"];
const SOURCES: &[&str] = &["/dev/sda1", "overlay", "proc", "none"];
const TARGETS: &[&str] = &["/mnt/t", "/proc", "/var/lib/x"];

fn pick<R: Rng>(rng: &mut R, xs: &[&str]) -> String {
    xs.choose(rng).unwrap().to_string()
}

fn maybe<R: Rng>(rng: &mut R, xs: &[&str]) -> Option<String> {
    rng.gen_bool(0.6).then(|| pick(rng, xs))
}

fn perms<R: Rng>(rng: &mut R, letters: &str) -> PermSet {
    loop {
        let s: String = letters.chars().filter(|_| rng.gen_bool(0.4)).collect();
        if !s.is_empty() {
            return s.parse().unwrap();
        }
    }
}

fn protocol<R: Rng>(rng: &mut R) -> Option<Protocol> {
    [
        None,
        Some(Protocol::Tcp),
        Some(Protocol::Udp),
        Some(Protocol::Icmp),
    ]
    .choose(rng)
    .copied()
    .unwrap()
}

fn options<R: Rng>(rng: &mut R) -> Option<Vec<String>> {
    if rng.gen_bool(0.5) {
        return None;
    }
    let mut v: Vec<String> = OPTS
        .iter()
        .filter(|_| rng.gen_bool(0.4))
        .map(|s| s.to_string())
        .collect();
    if v.is_empty() {
        v.push(pick(rng, OPTS));
    }
    v.sort();
    Some(v)
}

pub fn random_rule<R: Rng>(rng: &mut R) -> Rule {
    match rng.gen_range(0..8) {
        0 => Rule::Capability {
            capname: pick(rng, CAPS),
        },
        1 => Rule::Network {
            family: pick(rng, FAMILIES),
            sock_type: pick(rng, TYPES),
            protocol: protocol(rng),
        },
        2 => Rule::Mount(MountRule {
            fstype: maybe(rng, FSTYPES),
            options: options(rng),
            srcname: maybe(rng, SOURCES),
            target: maybe(rng, TARGETS),
        }),
        3 => Rule::PivotRoot {
            oldroot: maybe(rng, PATHS),
            newroot: maybe(rng, PATHS),
        },
        4 => Rule::Link {
            src: pick(rng, PATHS),
            dst: pick(rng, PATHS),
        },
        5 => Rule::FileAccess {
            path: pick(rng, PATHS),
            perms: perms(rng, "mrwkl"),
        },
        6 => Rule::Execution {
            path: pick(rng, PATHS),
        },
        _ => Rule::Deny {
            path: pick(rng, PATHS),
            perms: perms(rng, "mrwklx"),
        },
    }
}

pub fn random_profile<R: Rng>(rng: &mut R, max_rules: usize) -> Profile {
    let layer = if rng.gen_bool(0.5) {
        Layer::Container
    } else {
        Layer::Host
    };
    let mut p = Profile::new(format!("p{}", rng.gen_range(0..100)), layer).unwrap();
    if rng.gen_bool(0.3) {
        p.add_flag("complain").unwrap();
    }
    if rng.gen_bool(0.2) {
        p.add_flag("attach_disconnected").unwrap();
    }
    let n = rng.gen_range(0..=max_rules);
    for _ in 0..n {
        p.insert(random_rule(rng)).unwrap();
    }
    p
}

pub fn random_request<R: Rng>(rng: &mut R) -> OperationRequest {
    match rng.gen_range(0..6) {
        0 => OperationRequest::UseCapability {
            capname: pick(rng, CAPS),
        },
        1 => OperationRequest::OpenSocket {
            family: pick(rng, FAMILIES),
            sock_type: pick(rng, TYPES),
            protocol: protocol(rng),
        },
        2 => OperationRequest::FileOp {
            path: pick(rng, PATHS),
            perms: perms(rng, "mrwkl"),
        },
        3 => OperationRequest::Exec {
            path: pick(rng, PATHS),
        },
        4 => OperationRequest::DoMount {
            fstype: maybe(rng, FSTYPES),
            options: options(rng),
            srcname: maybe(rng, SOURCES),
            target: maybe(rng, TARGETS),
        },
        _ => OperationRequest::DoPivotRoot {
            oldroot: maybe(rng, PATHS),
            newroot: maybe(rng, PATHS),
        },
    }
}

// ---------------------------------------------------------------------------
// Brute-force matcher

fn has(perms: &PermSet, c: char) -> bool {
    perms.to_string().contains(c)
}

/// Does a single rule cover a request? Deny rules cover on any overlapping
/// letter; allow rules must cover every requested letter.
pub fn covers(rule: &Rule, req: &OperationRequest) -> bool {
    use OperationRequest as Q;
    match (rule, req) {
        (
            Rule::Deny { path, perms },
            Q::FileOp {
                path: p,
                perms: want,
            },
        ) => path == p && want.to_string().chars().any(|c| has(perms, c)),
        (Rule::Deny { path, perms }, Q::Exec { path: p }) => path == p && has(perms, 'x'),
        (Rule::Capability { capname }, Q::UseCapability { capname: c }) => capname == c,
        (
            Rule::Network {
                family,
                sock_type,
                protocol,
            },
            Q::OpenSocket {
                family: f,
                sock_type: t,
                protocol: p,
            },
        ) => family == f && sock_type == t && protocol.is_none_or(|x| Some(x) == *p),
        (
            Rule::FileAccess { path, perms },
            Q::FileOp {
                path: p,
                perms: want,
            },
        ) => path == p && want.to_string().chars().all(|c| has(perms, c)),
        (Rule::Execution { path }, Q::Exec { path: p }) => path == p,
        (
            Rule::Mount(m),
            Q::DoMount {
                fstype,
                options,
                srcname,
                target,
            },
        ) => {
            let field = |r: &Option<String>, q: &Option<String>| r.is_none() || r == q;
            field(&m.fstype, fstype)
                && (m.options.is_none() || m.options == *options)
                && field(&m.srcname, srcname)
                && field(&m.target, target)
        }
        (Rule::PivotRoot { .. }, Q::DoPivotRoot { .. }) => true,
        _ => false,
    }
}

pub fn is_deny(rule: &Rule) -> bool {
    matches!(rule, Rule::Deny { .. })
}

/// `Some(true)` allow, `Some(false)` deny; `None` for no profile.
pub fn brute_force_verdict(profile: Option<&Profile>, req: &OperationRequest) -> bool {
    let Some(p) = profile else { return true };
    let rules: Vec<&Rule> = p.rules().collect();
    let denied = rules.iter().any(|r| is_deny(r) && covers(r, req));
    let allowed = rules.iter().any(|r| !is_deny(r) && covers(r, req));
    !denied && allowed
}
