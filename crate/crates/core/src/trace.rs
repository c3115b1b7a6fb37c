//! Audit events and the line-oriented trace format
//! `t=<ms> kind=<kind> detail=<text>`.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ScanAccepted,
    ScanRejected,
    JointClosed,
    JointOpened,
    Timeout,
    Tamper,
    Alarm,
    Reset,
    /// A frame crossed the air link.
    Frame,
    Interrogation,
    AccessGranted,
    AccessDenied,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ScanAccepted => "scan_accepted",
            EventKind::ScanRejected => "scan_rejected",
            EventKind::JointClosed => "joint_closed",
            EventKind::JointOpened => "joint_opened",
            EventKind::Timeout => "timeout",
            EventKind::Tamper => "tamper",
            EventKind::Alarm => "alarm",
            EventKind::Reset => "reset",
            EventKind::Frame => "frame",
            EventKind::Interrogation => "interrogation",
            EventKind::AccessGranted => "access_granted",
            EventKind::AccessDenied => "access_denied",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessEvent {
    /// Milliseconds since scenario start.
    pub timestamp: u64,
    pub kind: EventKind,
    pub detail: String,
}

impl AccessEvent {
    pub fn new(timestamp: u64, kind: EventKind, detail: impl Into<String>) -> Self {
        Self { timestamp, kind, detail: detail.into() }
    }
}

impl fmt::Display for AccessEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} kind={} detail={}", self.timestamp, self.kind, self.detail)
    }
}

pub fn render(events: &[AccessEvent]) -> String {
    events.iter().map(|e| format!("{e}\n")).collect()
}

pub fn is_time_ordered(events: &[AccessEvent]) -> bool {
    events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format() {
        let e = AccessEvent::new(15, EventKind::JointClosed, "relay closed");
        assert_eq!(e.to_string(), "t=15 kind=joint_closed detail=relay closed");
    }

    #[test]
    fn ordering_check() {
        let a = AccessEvent::new(1, EventKind::Tamper, "");
        let b = AccessEvent::new(2, EventKind::Alarm, "");
        assert!(is_time_ordered(&[a.clone(), b.clone()]));
        assert!(!is_time_ordered(&[b, a]));
    }
}
