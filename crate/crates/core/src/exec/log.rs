use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Millis;
use crate::model::ActorMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LogKind {
    PostureChange,
    Interruption,
    Fault,
    Confirmation,
    StageTransition,
    Motion,
    Exposure,
    Release,
    Refusal,
    Revalidation,
    Resume,
    Abandon,
    SessionEnd,
}

/// Field order here is the JSON Lines export order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogEntry {
    pub t: Millis,
    pub kind: LogKind,
    pub actor: Option<ActorMode>,
    pub details: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SessionLog {
    entries: Vec<LogEntry>,
}

impl SessionLog {
    /// Append an entry. Timestamps earlier than the last entry are clamped
    /// up so the log stays non-decreasing.
    pub fn append(&mut self, t: Millis, kind: LogKind, actor: Option<ActorMode>, details: impl Into<String>) {
        let t = self.entries.last().map_or(t, |last| last.t.max(t));
        self.entries.push(LogEntry {
            t,
            kind,
            actor,
            details: details.into(),
        });
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, kind: LogKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{}", serde_json::to_string(e).expect("log entry serializes"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_field_order_is_stable() {
        let mut log = SessionLog::default();
        log.append(3, LogKind::StageTransition, Some(ActorMode::SA), "enter x");
        assert_eq!(
            log.to_jsonl(),
            "{\"t\":3,\"kind\":\"stageTransition\",\"actor\":\"SA\",\"details\":\"enter x\"}\n"
        );
    }

    #[test]
    fn timestamps_never_decrease() {
        let mut log = SessionLog::default();
        log.append(10, LogKind::Fault, None, "");
        log.append(5, LogKind::Fault, None, "");
        assert_eq!(log.entries()[1].t, 10);
    }
}
