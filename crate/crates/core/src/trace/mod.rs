//! Trace inputs: kernel-operation records, AppArmor audit events, and the
//! recorded session that bundles both with lifecycle markers.

mod audit;
mod record;
mod session;

use thiserror::Error;

pub use audit::{
    parse_audit_line, render_audit_line, AppArmorStatus, AuditPayload, AuditRecord, MountPayload,
    NetworkPayload,
};
pub use record::{parse_trace_line, render_trace_line, TraceRecord, PLACEHOLDER};
pub use session::{
    load_session, load_session_manifest, LineError, LoadError, LoadOptions, LoadedSession, Marker,
    MarkerEvent, SessionManifest, SourceKind, TraceSession,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("malformed line: {reason}")]
    MalformedLine { reason: String },
    #[error("invalid path in {field}: {value:?}")]
    InvalidPath { field: &'static str, value: String },
    #[error("missing key {0}")]
    MissingKey(String),
    #[error("invalid value for {key}: {value:?}")]
    InvalidValue { key: String, value: String },
    #[error("operation {operation:?} carries no family/sock_type")]
    UnknownOperationShape { operation: String },
}

impl TraceError {
    pub(crate) fn malformed(reason: impl Into<String>) -> Self {
        TraceError::MalformedLine {
            reason: reason.into(),
        }
    }
}
