use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::monitor::{evaluate_monitors, MonitorStatus, MonitorVerdict};
use crate::exec::{
    EmittedAction, Event, EventKind, ExecConfig, ExecError, ExecState, Executive, Millis,
    SessionLog, Verdict, VerdictStatus, View,
};
use crate::model::{NodeId, ProcessModel};

/// The parts of [`ExecState`] a trace records after each step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Snapshot {
    pub node: NodeId,
    pub clock: Millis,
    pub posture_valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posture_stable_since: Option<Millis>,
    pub arm_moving: bool,
    pub exposure_active: bool,
    pub interruption_active: bool,
    pub fault_active: bool,
    pub revalidation_required: bool,
    pub compliance_mode: bool,
    pub views_acquired: BTreeSet<View>,
    pub finished: bool,
}

impl From<&ExecState> for Snapshot {
    fn from(s: &ExecState) -> Self {
        Snapshot {
            node: s.current_node.clone(),
            clock: s.clock,
            posture_valid: s.posture_valid,
            posture_stable_since: s.posture_stable_since,
            arm_moving: s.arm_moving,
            exposure_active: s.exposure_active(),
            interruption_active: s.interruption_active,
            fault_active: s.fault_active,
            revalidation_required: s.revalidation_required,
            compliance_mode: s.compliance_mode,
            views_acquired: s.views_acquired.clone(),
            finished: s.finished,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceStep {
    pub index: usize,
    pub event: Event,
    pub node_before: NodeId,
    pub node_after: NodeId,
    pub state: Snapshot,
    pub actions: Vec<EmittedAction>,
    pub verdicts: Vec<Verdict>,
}

impl TraceStep {
    pub fn refused(&self) -> bool {
        self.verdicts.iter().any(|v| v.status == VerdictStatus::Refused)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TraceStatus {
    Completed,
    Abandoned,
    SafeStop,
    /// Events ran out with the workflow resting on an action.
    Stalled,
    /// The step cap cut the timeline short.
    BoundExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Trace {
    pub initial: Snapshot,
    pub steps: Vec<TraceStep>,
    pub status: TraceStatus,
    pub log: SessionLog,
    #[serde(skip)]
    pub final_state: Option<ExecState>,
}

impl Trace {
    pub fn refusals(&self) -> usize {
        self.steps.iter().filter(|s| s.refused()).count()
    }

    pub fn actions(&self) -> impl Iterator<Item = (usize, &EmittedAction)> {
        self.steps
            .iter()
            .flat_map(|s| s.actions.iter().map(move |a| (s.index, a)))
    }

    /// One JSON object per step, then a closing summary line with the log.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("step serializes"));
            out.push('\n');
        }
        let summary = serde_json::json!({
            "status": self.status,
            "steps": self.steps.len(),
            "log": self.log.entries(),
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

/// Order events by time, putting faults ahead of anything else at the same
/// instant. Otherwise stable.
pub fn order_events(events: &mut [Event]) {
    events.sort_by_key(|e| (e.t, e.kind != EventKind::Fault));
}

/// Feed `events` (already ordered) to the executive starting from `state`.
pub fn simulate(x: &Executive, mut state: ExecState, events: &[Event]) -> Result<Trace, ExecError> {
    let initial = Snapshot::from(&state);
    let cap = x.cfg.step_cap;
    let mut steps = Vec::with_capacity(events.len().min(cap));
    for (index, e) in events.iter().take(cap).enumerate() {
        let node_before = state.current_node.clone();
        let r = x.handle_event(&mut state, e)?;
        steps.push(TraceStep {
            index,
            event: e.clone(),
            node_before,
            node_after: state.current_node.clone(),
            state: Snapshot::from(&state),
            actions: r.actions,
            verdicts: r.verdicts,
        });
    }
    let status = if events.len() > cap {
        TraceStatus::BoundExhausted
    } else if state.finished {
        if state.abandoned {
            TraceStatus::Abandoned
        } else {
            TraceStatus::Completed
        }
    } else if state.interruption_active {
        TraceStatus::SafeStop
    } else {
        TraceStatus::Stalled
    };
    Ok(Trace {
        initial,
        steps,
        status,
        log: state.log.clone(),
        final_state: Some(state),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    SafeCompletion,
    BlockedSafely,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunResult {
    pub trace: Trace,
    pub verdicts: Vec<MonitorVerdict>,
    pub outcome: Outcome,
}

impl RunResult {
    pub fn verdict(&self, requirement: &str) -> Option<&MonitorVerdict> {
        self.verdicts.iter().find(|v| v.requirement == requirement)
    }

    pub fn violated(&self, requirement: &str) -> bool {
        self.verdict(requirement)
            .is_some_and(|v| v.status == MonitorStatus::Violated)
    }

    pub fn violations(&self) -> impl Iterator<Item = &MonitorVerdict> {
        self.verdicts.iter().filter(|v| v.status == MonitorStatus::Violated)
    }
}

pub fn classify(trace: &Trace, verdicts: &[MonitorVerdict]) -> Outcome {
    if verdicts.iter().any(|v| v.status == MonitorStatus::Violated) {
        Outcome::Violation
    } else if trace.status == TraceStatus::Completed && trace.refusals() == 0 {
        Outcome::SafeCompletion
    } else {
        Outcome::BlockedSafely
    }
}

/// Run a timeline from a fresh executive and evaluate every monitor.
pub fn run_timeline(
    m: &ProcessModel,
    cfg: &ExecConfig,
    events: &[Event],
    executive_enabled: bool,
) -> Result<RunResult, ExecError> {
    let x = Executive::new(m, cfg, executive_enabled);
    let mut events = events.to_vec();
    order_events(&mut events);
    let trace = simulate(&x, x.init()?, &events)?;
    let verdicts = evaluate_monitors(m, cfg, &trace);
    let outcome = classify(&trace, &verdicts);
    Ok(RunResult {
        trace,
        verdicts,
        outcome,
    })
}
