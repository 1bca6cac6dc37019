//! Default-deny mediation of operation requests against a profile, and
//! replay of exploit scenarios built from such requests.

mod request;
mod scenario;

use std::fmt;

use crate::perms::Perm;
use crate::profile::{MountRule, Profile, Rule};

pub use request::{OperationRequest, RequestParseError};
pub use scenario::{
    load_scenarios, run_scenario, ProfileSet, Refs, Scenario, ScenarioError, ScenarioOutcome, Step,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Allow,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Reason {
    /// A deny rule covers the request.
    ExplicitDeny(Rule),
    NoMatchingAllow,
    /// The first allow rule, in profile order, that covers the request.
    Matched(Rule),
    /// No profile is attached.
    Unconfined,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decision {
    pub verdict: Verdict,
    pub reason: Reason,
}

impl Decision {
    pub fn is_allow(&self) -> bool {
        self.verdict == Verdict::Allow
    }

    fn allow(reason: Reason) -> Self {
        Decision {
            verdict: Verdict::Allow,
            reason,
        }
    }

    fn deny(reason: Reason) -> Self {
        Decision {
            verdict: Verdict::Deny,
            reason,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Allow => "allow",
            Verdict::Deny => "deny",
        })
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::ExplicitDeny(r) => write!(f, "explicit deny ({r})"),
            Reason::NoMatchingAllow => f.write_str("no matching allow rule"),
            Reason::Matched(r) => write!(f, "matched ({r})"),
            Reason::Unconfined => f.write_str("unconfined"),
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.verdict, self.reason)
    }
}

fn deny_covers(rule: &Rule, req: &OperationRequest) -> bool {
    let Rule::Deny { path, perms } = rule else {
        return false;
    };
    match req {
        OperationRequest::FileOp {
            path: p,
            perms: want,
        } => p == path && want.intersects(*perms),
        OperationRequest::Exec { path: p } => p == path && perms.contains(Perm::Exec),
        _ => false,
    }
}

fn field_matches(rule: &Option<String>, req: &Option<String>) -> bool {
    rule.is_none() || rule == req
}

fn allow_covers(rule: &Rule, req: &OperationRequest) -> bool {
    match (rule, req) {
        (Rule::Capability { capname }, OperationRequest::UseCapability { capname: want }) => {
            capname == want
        }
        (
            Rule::Network {
                family,
                sock_type,
                protocol,
            },
            OperationRequest::OpenSocket {
                family: f,
                sock_type: t,
                protocol: p,
            },
        ) => family == f && sock_type == t && (protocol.is_none() || protocol == p),
        (
            Rule::FileAccess { path, perms },
            OperationRequest::FileOp {
                path: p,
                perms: want,
            },
        ) => path == p && want.is_subset(*perms),
        (Rule::Execution { path }, OperationRequest::Exec { path: p }) => path == p,
        (
            Rule::Mount(MountRule {
                fstype,
                options,
                srcname,
                target,
            }),
            OperationRequest::DoMount {
                fstype: f,
                options: o,
                srcname: s,
                target: t,
            },
        ) => {
            field_matches(fstype, f)
                && (options.is_none() || options == o)
                && field_matches(srcname, s)
                && field_matches(target, t)
        }
        (Rule::PivotRoot { .. }, OperationRequest::DoPivotRoot { .. }) => true,
        _ => false,
    }
}

/// Adjudicate one request. With no profile the request is unconfined. A
/// matching deny rule wins over any allow; otherwise some allow rule must
/// cover the request.
pub fn decide(profile: Option<&Profile>, req: &OperationRequest) -> Decision {
    let Some(profile) = profile else {
        return Decision::allow(Reason::Unconfined);
    };
    if let Some(r) = profile.rules().find(|r| deny_covers(r, req)) {
        return Decision::deny(Reason::ExplicitDeny(r.clone()));
    }
    match profile
        .rules()
        .find(|r| !matches!(r, Rule::Deny { .. }) && allow_covers(r, req))
    {
        Some(r) => Decision::allow(Reason::Matched(r.clone())),
        None => Decision::deny(Reason::NoMatchingAllow),
    }
}
