//! Timed safety executive.
//!
//! [`Executive`] walks a [`ProcessModel`](crate::model::ProcessModel) one
//! [`Event`] at a time. Safety-critical steps (arm motion, exposure, release,
//! resume) are granted only when their gate predicates hold; with enforcement
//! disabled the same bookkeeping runs but every gate is waved through, which
//! is how hazard scenarios demonstrate what the executive prevents.

mod config;
mod executive;
mod gates;
mod ledger;
mod log;
mod requirements;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{ActionRole, ConfigError, ExecConfig};
pub use executive::{
    init_executive, EmittedAction, ExecError, Executive, StepResult, Verdict, VerdictStatus,
};
pub use gates::{
    gate_exposure, gate_motion, gate_plan, stabilization_elapsed, Conjunct, GateDecision,
    EXPOSURE_CONJUNCTS, MOTION_CONJUNCTS,
};
pub use ledger::{ConfirmationLedger, LedgerAction};
pub use log::{LogEntry, LogKind, SessionLog};
pub use requirements::{
    load_requirements, parse_requirements, Methodology, RegistryError, RequirementCategory,
    RequirementSpec,
};
pub use state::{ExecState, Revalidation};

pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    Radiographer,
    Patient,
    Sensor,
    System,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Radiographer, Source::Patient, Source::Sensor, Source::System];
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EventKind {
    CommandConfirm,
    VoiceStop,
    UiStop,
    PostureUpdate,
    PostureUnstable,
    MovementDetected,
    MotionComplete,
    ExposureRequest,
    ExposureComplete,
    Fault,
    FaultCleared,
    Assent,
    AssentWithdrawn,
    ResumeRequest,
    AbandonSession,
    Tick,
}

impl EventKind {
    pub const ALL: [EventKind; 16] = [
        EventKind::CommandConfirm,
        EventKind::VoiceStop,
        EventKind::UiStop,
        EventKind::PostureUpdate,
        EventKind::PostureUnstable,
        EventKind::MovementDetected,
        EventKind::MotionComplete,
        EventKind::ExposureRequest,
        EventKind::ExposureComplete,
        EventKind::Fault,
        EventKind::FaultCleared,
        EventKind::Assent,
        EventKind::AssentWithdrawn,
        EventKind::ResumeRequest,
        EventKind::AbandonSession,
        EventKind::Tick,
    ];

    /// Session-log kind that this input must produce exactly once, if any.
    pub fn log_kind(self) -> Option<LogKind> {
        match self {
            EventKind::PostureUpdate | EventKind::PostureUnstable | EventKind::MovementDetected => {
                Some(LogKind::PostureChange)
            }
            EventKind::VoiceStop | EventKind::UiStop => Some(LogKind::Interruption),
            EventKind::Fault | EventKind::FaultCleared => Some(LogKind::Fault),
            EventKind::CommandConfirm
            | EventKind::Assent
            | EventKind::AssentWithdrawn
            | EventKind::ResumeRequest => Some(LogKind::Confirmation),
            _ => None,
        }
    }

    pub fn is_stop(self) -> bool {
        matches!(self, EventKind::VoiceStop | EventKind::UiStop)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::CommandConfirm => "commandConfirm",
            EventKind::VoiceStop => "voiceStop",
            EventKind::UiStop => "uiStop",
            EventKind::PostureUpdate => "postureUpdate",
            EventKind::PostureUnstable => "postureUnstable",
            EventKind::MovementDetected => "movementDetected",
            EventKind::MotionComplete => "motionComplete",
            EventKind::ExposureRequest => "exposureRequest",
            EventKind::ExposureComplete => "exposureComplete",
            EventKind::Fault => "fault",
            EventKind::FaultCleared => "faultCleared",
            EventKind::Assent => "assent",
            EventKind::AssentWithdrawn => "assentWithdrawn",
            EventKind::ResumeRequest => "resumeRequest",
            EventKind::AbandonSession => "abandonSession",
            EventKind::Tick => "tick",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

/// Command carried by a `commandConfirm` event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Command {
    SelfTest,
    Stage,
    Plan,
    MotionStart,
    Exposure,
    Release,
    RequestAdjustment,
    Advance,
    SetGuard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum View {
    #[serde(rename = "CC")]
    Cc,
    #[serde(rename = "MLO-L")]
    MloL,
    #[serde(rename = "MLO-R")]
    MloR,
}

impl View {
    pub const ALL: [View; 3] = [View::Cc, View::MloL, View::MloR];

    pub fn as_str(self) -> &'static str {
        match self {
            View::Cc => "CC",
            View::MloL => "MLO-L",
            View::MloR => "MLO-R",
        }
    }
}

impl FromStr for View {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        View::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown view `{s}`"))
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Payload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// Kept as text so value corruption can produce out-of-range views.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
}

impl Payload {
    pub fn is_empty(&self) -> bool {
        *self == Payload::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Event {
    pub t: Millis,
    pub source: Source,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Payload::is_empty")]
    pub payload: Payload,
}

impl Event {
    pub fn new(t: Millis, source: Source, kind: EventKind) -> Self {
        Event {
            t,
            source,
            kind,
            payload: Payload::default(),
        }
    }

    pub fn command(t: Millis, source: Source, command: Command) -> Self {
        let mut e = Event::new(t, source, EventKind::CommandConfirm);
        e.payload.command = Some(command);
        e
    }

    pub fn with_valid(mut self, valid: bool) -> Self {
        self.payload.valid = Some(valid);
        self
    }

    pub fn with_view(mut self, view: View) -> Self {
        self.payload.view = Some(view.as_str().to_string());
        self
    }

    pub fn with_code(mut self, code: i64) -> Self {
        self.payload.code = Some(code);
        self
    }

    pub fn with_guard(mut self, guard: &str, value: bool) -> Self {
        self.payload.guard = Some(guard.to_string());
        self.payload.valid = Some(value);
        self
    }

    pub fn valid(&self) -> bool {
        self.payload.valid.unwrap_or(true)
    }

    pub fn command_kind(&self) -> Option<Command> {
        if self.kind == EventKind::CommandConfirm {
            self.payload.command
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_json_is_camel_case() {
        let e = Event::command(5, Source::Radiographer, Command::MotionStart);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(
            s,
            r#"{"t":5,"source":"Radiographer","kind":"commandConfirm","payload":{"command":"motionStart"}}"#
        );
        let back: Event = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        let tick: Event = serde_json::from_str(r#"{"t":1,"source":"System","kind":"tick"}"#).unwrap();
        assert!(tick.payload.is_empty());
    }

    #[test]
    fn loggable_kinds() {
        let loggable = EventKind::ALL.iter().filter(|k| k.log_kind().is_some()).count();
        assert_eq!(loggable, 11);
        assert_eq!("MLO-L".parse::<View>().unwrap(), View::MloL);
    }
}
