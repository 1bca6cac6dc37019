//! Training modes: which slice of a recorded session feeds generation.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use thiserror::Error;

use crate::trace::{AuditRecord, MarkerEvent, TraceRecord, TraceSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    /// From daemon start to the end of the trace: host and container.
    Mode1,
    /// From container start to the end of the trace.
    Mode2,
    /// Between the training markers only.
    Mode3,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModeError {
    #[error("{mode} needs a {event} marker in the session")]
    MissingMarker { mode: Mode, event: MarkerEvent },
    #[error("unknown mode {0:?}; expected 1, 2 or 3")]
    Unknown(String),
}

impl Mode {
    pub fn required_markers(self) -> &'static [MarkerEvent] {
        match self {
            Mode::Mode1 => &[MarkerEvent::DaemonStart],
            Mode::Mode2 => &[MarkerEvent::ContainerStart],
            Mode::Mode3 => &[MarkerEvent::TrainStart, MarkerEvent::TrainStop],
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Mode1 => "mode 1",
            Mode::Mode2 => "mode 2",
            Mode::Mode3 => "mode 3",
        })
    }
}

impl FromStr for Mode {
    type Err = ModeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().trim_start_matches("mode") {
            "1" => Ok(Mode::Mode1),
            "2" => Ok(Mode::Mode2),
            "3" => Ok(Mode::Mode3),
            _ => Err(ModeError::Unknown(s.to_owned())),
        }
    }
}

/// Record and audit index ranges selected by a mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub records: Range<usize>,
    pub audits: Range<usize>,
}

impl Window {
    pub fn records<'a>(&self, s: &'a TraceSession) -> &'a [TraceRecord] {
        &s.records[self.records.clone()]
    }

    pub fn audits<'a>(&self, s: &'a TraceSession) -> &'a [AuditRecord] {
        &s.audits[self.audits.clone()]
    }
}

/// Compute the window for `mode`. A marker without an audit position leaves
/// that end of the audit window open.
pub fn window(session: &TraceSession, mode: Mode) -> Result<Window, ModeError> {
    let get = |event| {
        session
            .marker(event)
            .ok_or(ModeError::MissingMarker { mode, event })
    };
    let (start, stop) = match mode {
        Mode::Mode1 => (get(MarkerEvent::DaemonStart)?, None),
        Mode::Mode2 => (get(MarkerEvent::ContainerStart)?, None),
        Mode::Mode3 => (
            get(MarkerEvent::TrainStart)?,
            Some(get(MarkerEvent::TrainStop)?),
        ),
    };
    let rec_end = stop.map_or(session.records.len(), |m| m.index);
    let audit_start = start.audit_index.unwrap_or(0);
    let audit_end = stop
        .and_then(|m| m.audit_index)
        .unwrap_or(session.audits.len());
    Ok(Window {
        records: start.index..rec_end.max(start.index),
        audits: audit_start..audit_end.max(audit_start),
    })
}
