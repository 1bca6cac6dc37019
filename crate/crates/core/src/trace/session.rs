use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{parse_audit_line, parse_trace_line, AuditRecord, TraceError, TraceRecord};

/// Lifecycle events recorded alongside a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MarkerEvent {
    DaemonStart,
    ContainerStart,
    TrainStart,
    TrainStop,
}

impl MarkerEvent {
    pub const ALL: [MarkerEvent; 4] = [
        MarkerEvent::DaemonStart,
        MarkerEvent::ContainerStart,
        MarkerEvent::TrainStart,
        MarkerEvent::TrainStop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MarkerEvent::DaemonStart => "daemon_start",
            MarkerEvent::ContainerStart => "container_start",
            MarkerEvent::TrainStart => "train_start",
            MarkerEvent::TrainStop => "train_stop",
        }
    }
}

impl fmt::Display for MarkerEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MarkerEvent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MarkerEvent::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown marker event {s:?}"))
    }
}

/// A lifecycle event positioned in the trace.
///
/// `index` is the number of trace records that precede the event.
/// `audit_index`, when given, is the same position in the audit log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Marker {
    pub event: MarkerEvent,
    pub index: usize,
    pub audit_index: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceSession {
    pub records: Vec<TraceRecord>,
    pub audits: Vec<AuditRecord>,
    pub markers: Vec<Marker>,
}

impl TraceSession {
    pub fn marker(&self, event: MarkerEvent) -> Option<&Marker> {
        self.markers.iter().find(|m| m.event == event)
    }

    /// Check marker ordering and bounds against the loaded records.
    pub fn validate_markers(&self) -> Result<(), String> {
        validate_markers(&self.markers, self.records.len(), self.audits.len())
    }
}

fn validate_markers(markers: &[Marker], records: usize, audits: usize) -> Result<(), String> {
    for (i, m) in markers.iter().enumerate() {
        if m.index > records {
            return Err(format!(
                "marker {} index {} exceeds record count {records}",
                m.event, m.index
            ));
        }
        if let Some(a) = m.audit_index {
            if a > audits {
                return Err(format!(
                    "marker {} audit_index {a} exceeds audit count {audits}",
                    m.event
                ));
            }
        }
        if markers[..i].iter().any(|p| p.event == m.event) {
            return Err(format!("marker {} listed twice", m.event));
        }
        if let Some(prev) = i.checked_sub(1).map(|j| &markers[j]) {
            if prev.index > m.index {
                return Err(format!(
                    "marker {} (index {}) precedes {} (index {})",
                    m.event, m.index, prev.event, prev.index
                ));
            }
        }
    }
    // Lifecycle order must agree with positions as well.
    let mut sorted: Vec<&Marker> = markers.iter().collect();
    sorted.sort_by_key(|m| m.event);
    for pair in sorted.windows(2) {
        if pair[0].index > pair[1].index {
            return Err(format!(
                "marker {} (index {}) is after {} (index {})",
                pair[0].event, pair[0].index, pair[1].event, pair[1].index
            ));
        }
        if let (Some(a), Some(b)) = (pair[0].audit_index, pair[1].audit_index) {
            if a > b {
                return Err(format!(
                    "marker {} audit_index {a} is after {} audit_index {b}",
                    pair[0].event, pair[1].event
                ));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Trace,
    Audit,
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceKind::Trace => "trace",
            SourceKind::Audit => "audit",
        })
    }
}

/// A parse failure tied to its file and 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{source_kind} line {line}: {error}")]
pub struct LineError {
    pub source_kind: SourceKind,
    pub line: usize,
    pub error: TraceError,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{} line(s) failed to parse; first: {}", .0.len(), .0[0])]
    Parse(Vec<LineError>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Skip and count bad lines instead of rejecting the session.
    pub lenient: bool,
}

#[derive(Debug, Clone)]
pub struct LoadedSession {
    pub session: TraceSession,
    /// Lines skipped in lenient mode. Always empty in strict mode.
    pub skipped: Vec<LineError>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawMarker {
    event: String,
    index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audit_index: Option<usize>,
}

/// On-disk session manifest. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionManifest {
    pub trace: PathBuf,
    pub audit: PathBuf,
    #[serde(default)]
    markers: Vec<RawMarker>,
}

impl SessionManifest {
    pub fn read(path: &Path) -> Result<Self, LoadError> {
        let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut m: SessionManifest =
            serde_json::from_str(&text).map_err(|e| LoadError::Manifest(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.trace = base.join(&m.trace);
        m.audit = base.join(&m.audit);
        Ok(m)
    }

    pub fn markers(&self) -> Result<Vec<Marker>, LoadError> {
        self.markers
            .iter()
            .map(|r| {
                Ok(Marker {
                    event: r.event.parse().map_err(LoadError::Manifest)?,
                    index: r.index,
                    audit_index: r.audit_index,
                })
            })
            .collect()
    }
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Parse every non-blank line. Returns the parsed items, the errors, and for
/// each non-blank line the number of successfully parsed items before it.
fn parse_lines<T>(
    text: &str,
    kind: SourceKind,
    parse: impl Fn(&str) -> Result<T, TraceError>,
) -> (Vec<T>, Vec<LineError>, Vec<usize>) {
    let mut items = Vec::new();
    let mut errors = Vec::new();
    let mut kept_before = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        kept_before.push(items.len());
        match parse(line) {
            Ok(v) => items.push(v),
            Err(error) => errors.push(LineError {
                source_kind: kind,
                line: n + 1,
                error,
            }),
        }
    }
    kept_before.push(items.len());
    (items, errors, kept_before)
}

/// Load a session from explicit trace and audit files plus markers.
///
/// Marker indices count non-blank input lines. When lenient loading drops
/// lines, markers are shifted so they still sit between the same surviving
/// records.
pub fn load_session(
    trace_file: &Path,
    audit_file: &Path,
    markers: &[Marker],
    opts: LoadOptions,
) -> Result<LoadedSession, LoadError> {
    let trace_text = read(trace_file)?;
    let audit_text = read(audit_file)?;
    let (records, mut errors, trace_pos) =
        parse_lines(&trace_text, SourceKind::Trace, parse_trace_line);
    let (audits, audit_errors, audit_pos) =
        parse_lines(&audit_text, SourceKind::Audit, parse_audit_line);
    errors.extend(audit_errors);

    let trace_lines = trace_pos.len() - 1;
    let audit_lines = audit_pos.len() - 1;
    validate_markers(markers, trace_lines, audit_lines).map_err(LoadError::Manifest)?;

    if !errors.is_empty() && !opts.lenient {
        return Err(LoadError::Parse(errors));
    }

    let markers = markers
        .iter()
        .map(|m| Marker {
            event: m.event,
            index: trace_pos[m.index],
            audit_index: m.audit_index.map(|a| audit_pos[a]),
        })
        .collect();

    Ok(LoadedSession {
        session: TraceSession {
            records,
            audits,
            markers,
        },
        skipped: errors,
    })
}

/// Load the session a manifest file describes.
pub fn load_session_manifest(
    manifest: &Path,
    opts: LoadOptions,
) -> Result<LoadedSession, LoadError> {
    let m = SessionManifest::read(manifest)?;
    let markers = m.markers()?;
    load_session(&m.trace, &m.audit, &markers, opts)
}
