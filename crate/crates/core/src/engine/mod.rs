//! Rule synthesis from traces and audit logs.

mod audit_rules;
mod config;
mod dispatch;
mod translate;

pub use audit_rules::{
    translate_audit_capabilities, translate_audit_mounts, translate_audit_network,
};
pub use config::{ConfigError, EngineConfig, DEFAULT_SHELLS};
pub use dispatch::{dispatch_rule, DispatchEntry, DispatchError, DispatchTable, RuleKind};
pub use translate::{
    build_rule, classify_layer, translate_trace, BuildError, TranslateStats, Translation,
};

pub use crate::profile::Layer;
