use serde::{Deserialize, Serialize};

use super::{
    gate_exposure, gate_motion, gate_plan, ActionRole, Command, Event, EventKind, ExecConfig,
    ExecState, LedgerAction, LogKind, Millis, Revalidation, Source, View,
};
use crate::model::{validate_model, Diagnostic, NodeKind, ProcessModel};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "action")]
pub enum EmittedAction {
    StartMotion,
    HaltMotion,
    MotionCompleted,
    AcceptPlan { valid: bool },
    TriggerExposure,
    AbortExposure,
    EnterCompliance,
    ReleasePatient { safe_path: bool },
    Resume,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum VerdictStatus {
    Granted,
    Refused,
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Verdict {
    pub status: VerdictStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub requirement: Option<String>,
    pub reason: String,
}

impl Verdict {
    fn granted(reason: impl Into<String>) -> Self {
        Verdict {
            status: VerdictStatus::Granted,
            requirement: None,
            reason: reason.into(),
        }
    }

    fn ignored(reason: impl Into<String>) -> Self {
        Verdict {
            status: VerdictStatus::Ignored,
            requirement: None,
            reason: reason.into(),
        }
    }

    fn refused(requirement: &str, reason: impl Into<String>) -> Self {
        Verdict {
            status: VerdictStatus::Refused,
            requirement: Some(requirement.to_string()),
            reason: reason.into(),
        }
    }

    fn cite(mut self, requirement: &str) -> Self {
        self.requirement = Some(requirement.to_string());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepResult {
    pub actions: Vec<EmittedAction>,
    pub verdicts: Vec<Verdict>,
}

impl StepResult {
    pub fn refused(&self) -> bool {
        self.verdicts.iter().any(|v| v.status == VerdictStatus::Refused)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("event at t={event} precedes executive clock {clock}")]
    TimestampRegression { event: Millis, clock: Millis },
    #[error("model is invalid: {0:?}")]
    InvalidModel(Vec<Diagnostic>),
}

/// A process model bound to a configuration. `enforce = false` keeps every
/// piece of bookkeeping but grants every gated request and skips recovery
/// routing.
#[derive(Debug, Clone, Copy)]
pub struct Executive<'a> {
    pub model: &'a ProcessModel,
    pub cfg: &'a ExecConfig,
    pub enforce: bool,
}

pub fn init_executive(model: &ProcessModel, cfg: &ExecConfig) -> Result<ExecState, ExecError> {
    Executive::new(model, cfg, true).init()
}

impl<'a> Executive<'a> {
    pub fn new(model: &'a ProcessModel, cfg: &'a ExecConfig, enforce: bool) -> Self {
        Executive { model, cfg, enforce }
    }

    /// Fresh state, advanced out of the initial pseudo-node to the first
    /// action so that the first event lands on real work.
    pub fn init(&self) -> Result<ExecState, ExecError> {
        let diags = validate_model(self.model);
        if !diags.is_empty() {
            return Err(ExecError::InvalidModel(diags));
        }
        let mut s = ExecState::fresh(
            self.model.initial.clone(),
            self.cfg.stabilization_window_ms,
            self.cfg.staleness_window_ms,
        );
        let mut out = StepResult::default();
        let initial = self.model.initial.clone();
        self.goto(&mut s, &mut out, &initial, 0);
        Ok(s)
    }

    fn role_here(&self, s: &ExecState) -> Option<ActionRole> {
        self.model
            .node(&s.current_node)
            .filter(|n| n.kind == NodeKind::Action)
            .map(|n| self.cfg.role_of(&n.id))
    }

    fn frozen(&self, s: &ExecState) -> bool {
        self.enforce && s.interruption_active
    }

    fn guard_value(&self, s: &ExecState, guard: &str) -> bool {
        match guard {
            "systemReady" => s.system_ready,
            "processStageIdentified" => s.stage_identified,
            "postureDetected" => s.posture_valid,
            "trajectoryValid" => s.trajectory_valid,
            "faultDetected" => s.fault_active,
            "interruptionHRI" => s.interruption_active || s.interruption_latch,
            "patientOK" => s.patient_assent_fresh(),
            "adjustmentsNeeded" => s.adjustments_requested,
            "retakeNeeded" => s.retake_pending,
            "processDone" => {
                s.abandoned
                    || self
                        .cfg
                        .required_views
                        .iter()
                        .all(|v| s.views_acquired.contains(v))
            }
            other => s.custom_guards.get(other).copied().unwrap_or(false),
        }
    }

    /// Move to `target` and run decisions until the workflow rests on an
    /// action or a final node.
    fn goto(&self, s: &mut ExecState, out: &mut StepResult, target: &str, t: Millis) {
        let mut budget = self.model.nodes.len() * 4 + 4;
        let mut next = target.to_string();
        loop {
            if budget == 0 {
                s.log.append(t, LogKind::Refusal, None, "workflow routing did not settle");
                return;
            }
            budget -= 1;
            s.current_node = next;
            let Some(node) = self.model.node(&s.current_node) else {
                return;
            };
            let follow = match node.kind {
                NodeKind::Initial => self.successor(&node.id),
                NodeKind::Decision => {
                    let guard = node.guard.clone().unwrap_or_default();
                    let value = self.guard_value(s, &guard);
                    if guard == "patientOK" && !value {
                        s.safe_release_pending = true;
                    }
                    self.model
                        .outgoing(&node.id)
                        .find(|e| e.guard_value == Some(value))
                        .map(|e| e.to.clone())
                }
                NodeKind::Action | NodeKind::Final => {
                    if self.on_enter(s, out, t) {
                        self.successor(&s.current_node)
                    } else {
                        None
                    }
                }
            };
            match follow {
                Some(n) => next = n,
                None => return,
            }
        }
    }

    fn successor(&self, id: &str) -> Option<String> {
        self.model.outgoing(id).next().map(|e| e.to.clone())
    }

    fn complete_action(&self, s: &mut ExecState, out: &mut StepResult, t: Millis) {
        if let Some(next) = self.successor(&s.current_node) {
            self.goto(s, out, &next, t);
        }
    }

    /// Entry hooks. Returns true when the action completes immediately.
    fn on_enter(&self, s: &mut ExecState, out: &mut StepResult, t: Millis) -> bool {
        let Some(node) = self.model.node(&s.current_node) else {
            return false;
        };
        match node.kind {
            NodeKind::Final => {
                if !s.finished {
                    s.finished = true;
                    s.log.append(t, LogKind::SessionEnd, None, format!("reached {}", node.id));
                }
                false
            }
            NodeKind::Action => {
                s.log.append(
                    t,
                    LogKind::StageTransition,
                    node.actor_mode,
                    format!("enter {}", node.label),
                );
                match self.cfg.role_of(&node.id) {
                    ActionRole::IdentifyStage => {
                        s.stage_identified = false;
                        false
                    }
                    ActionRole::DeterminePosture => {
                        s.interruption_latch = false;
                        false
                    }
                    ActionRole::PlanTrajectory => {
                        s.trajectory_valid = false;
                        false
                    }
                    ActionRole::Adjustment => {
                        s.adjustments_requested = false;
                        s.retake_pending = false;
                        false
                    }
                    ActionRole::Release
                        if s.safe_release_pending || s.abandoned || (self.enforce && s.fault_active) =>
                    {
                        s.safe_release_pending = false;
                        self.safe_release(s, out, t, "safe path");
                        true
                    }
                    _ => false,
                }
            }
            _ => false,
        }
    }

    fn halt_motion(&self, s: &mut ExecState, out: &mut StepResult, t: Millis) {
        if s.arm_moving {
            s.arm_moving = false;
            s.posture_stable_since = s.posture_stable_since.map(|_| t);
            out.actions.push(EmittedAction::HaltMotion);
            s.log.append(t, LogKind::Motion, None, "motion halted");
        }
    }

    fn abort_exposure(&self, s: &mut ExecState, out: &mut StepResult, t: Millis) {
        if s.exposure_active() {
            s.exposure_locked = true;
            out.actions.push(EmittedAction::AbortExposure);
            s.log.append(t, LogKind::Exposure, None, "exposure aborted");
        }
    }

    fn enter_compliance(&self, s: &mut ExecState, out: &mut StepResult) {
        if !s.compliance_mode {
            s.compliance_mode = true;
            out.actions.push(EmittedAction::EnterCompliance);
        }
    }

    fn safe_release(&self, s: &mut ExecState, out: &mut StepResult, t: Millis, why: &str) {
        self.halt_motion(s, out, t);
        self.abort_exposure(s, out, t);
        s.compliance_mode = true;
        out.actions.push(EmittedAction::ReleasePatient { safe_path: true });
        s.log.append(t, LogKind::Release, None, format!("compliant release ({why})"));
    }

    fn require_revalidation(&self, s: &mut ExecState) {
        s.pending = Revalidation::all();
        s.revalidation_required = true;
    }

    fn revalidated(&self, s: &mut ExecState, t: Millis, component: &str) {
        let was = s.pending.any();
        let slot = match component {
            "posture" => &mut s.pending.posture,
            "trajectory" => &mut s.pending.trajectory,
            _ => &mut s.pending.readiness,
        };
        if !*slot {
            return;
        }
        *slot = false;
        s.log.append(t, LogKind::Revalidation, None, format!("{component} revalidated"));
        if was && !s.pending.any() {
            s.revalidation_required = false;
        }
    }

    fn refuse(&self, s: &mut ExecState, out: &mut StepResult, t: Millis, req: &str, reason: String) {
        s.log.append(t, LogKind::Refusal, None, format!("{req}: {reason}"));
        out.verdicts.push(Verdict::refused(req, reason));
    }

    fn route_via(&self, s: &mut ExecState, out: &mut StepResult, guard: &str, t: Millis) -> bool {
        match self.model.decision_for_guard(guard).map(|n| n.id.clone()) {
            Some(d) => {
                self.goto(s, out, &d, t);
                true
            }
            None => false,
        }
    }

    /// Process one event. The state is updated in place.
    pub fn handle_event(&self, s: &mut ExecState, e: &Event) -> Result<StepResult, ExecError> {
        if e.t < s.clock {
            return Err(ExecError::TimestampRegression {
                event: e.t,
                clock: s.clock,
            });
        }
        s.clock = e.t;
        let t = e.t;
        let mut out = StepResult::default();
        if let Some(kind) = e.kind.log_kind() {
            let mut details = format!("{} {}", e.source, e.kind);
            if let Some(c) = e.payload.command {
                details.push_str(&format!(" {c:?}"));
            }
            if let Some(v) = e.payload.valid {
                details.push_str(if v { " valid" } else { " invalid" });
            }
            s.log.append(t, kind, None, details);
        }
        if s.finished {
            out.verdicts.push(Verdict::ignored("session finished"));
            return Ok(out);
        }

        match e.kind {
            EventKind::Fault => self.on_fault(s, &mut out, e),
            EventKind::FaultCleared => {
                s.fault_active = false;
                out.verdicts.push(Verdict::granted("fault cleared"));
            }
            EventKind::VoiceStop | EventKind::UiStop => self.on_stop(s, &mut out, e),
            EventKind::PostureUpdate => self.on_posture(s, &mut out, e),
            EventKind::PostureUnstable | EventKind::MovementDetected => self.on_movement(s, &mut out, e),
            EventKind::MotionComplete => {
                if s.arm_moving {
                    s.arm_moving = false;
                    s.posture_stable_since = s.posture_stable_since.map(|_| t);
                    out.actions.push(EmittedAction::MotionCompleted);
                    s.log.append(t, LogKind::Motion, None, "motion complete");
                    out.verdicts.push(Verdict::granted("motion complete"));
                    if self.role_here(s) == Some(ActionRole::ArmMotion) && !self.frozen(s) {
                        self.complete_action(s, &mut out, t);
                    }
                } else {
                    out.verdicts.push(Verdict::ignored("no motion in progress"));
                }
            }
            EventKind::ExposureRequest => self.on_exposure_request(s, &mut out, e),
            EventKind::ExposureComplete => self.on_exposure_complete(s, &mut out, e),
            EventKind::Assent => {
                if e.source == Source::Patient {
                    for a in [LedgerAction::MotionStart, LedgerAction::Exposure, LedgerAction::Release] {
                        s.ledger.record(a, Source::Patient, t);
                    }
                    s.last_assent = Some(t);
                    self.revalidated(s, t, "readiness");
                    out.verdicts.push(Verdict::granted("patient assent recorded"));
                } else {
                    out.verdicts
                        .push(Verdict::ignored("assent accepted from the patient only").cite("R20"));
                }
            }
            EventKind::AssentWithdrawn => {
                if e.source == Source::Patient {
                    s.ledger.clear_source(Source::Patient);
                    s.last_assent = None;
                    out.verdicts.push(Verdict::granted("patient assent withdrawn"));
                } else {
                    out.verdicts.push(Verdict::ignored("withdrawal accepted from the patient only"));
                }
            }
            EventKind::ResumeRequest => {
                s.ledger.record(LedgerAction::Resume, e.source, t);
                self.try_resume(s, &mut out, t);
            }
            EventKind::AbandonSession => {
                s.abandoned = true;
                s.log.append(t, LogKind::Abandon, None, format!("abandoned by {}", e.source));
                out.verdicts.push(Verdict::granted("session abandoned").cite("R25"));
                if self.enforce {
                    s.safe_release_pending = true;
                    s.interruption_latch = false;
                    match self.cfg.node_for_role(self.model, ActionRole::Release) {
                        Some(r) => {
                            let r = r.to_string();
                            self.goto(s, &mut out, &r, t);
                        }
                        None => self.safe_release(s, &mut out, t, "abandon"),
                    }
                }
            }
            EventKind::Tick => out.verdicts.push(Verdict::granted("time advanced")),
            EventKind::CommandConfirm => self.on_command(s, &mut out, e),
        }
        Ok(out)
    }

    fn on_fault(&self, s: &mut ExecState, out: &mut StepResult, e: &Event) {
        let t = e.t;
        s.fault_active = true;
        self.require_revalidation(s);
        out.verdicts.push(Verdict::granted("fault recorded").cite("R25"));
        if !self.enforce {
            return;
        }
        self.halt_motion(s, out, t);
        self.abort_exposure(s, out, t);
        self.enter_compliance(s, out);
        if self.role_here(s).is_some_and(ActionRole::in_positioning_cycle) {
            s.interruption_latch = false;
            s.safe_release_pending = true;
            self.route_via(s, out, "faultDetected", t);
        }
    }

    fn on_stop(&self, s: &mut ExecState, out: &mut StepResult, e: &Event) {
        let t = e.t;
        s.interruption_active = true;
        s.stopped_at = Some(t);
        if self.enforce {
            self.halt_motion(s, out, t);
            self.abort_exposure(s, out, t);
            self.enter_compliance(s, out);
            if self.role_here(s).is_some_and(ActionRole::in_positioning_cycle) {
                s.interruption_latch = true;
            }
        }
        s.posture_stable_since = None;
        self.require_revalidation(s);
        out.verdicts
            .push(Verdict::granted(format!("protective stop from {}", e.source)).cite("R14"));
    }

    fn on_posture(&self, s: &mut ExecState, out: &mut StepResult, e: &Event) {
        let t = e.t;
        let valid = e.valid();
        s.posture_valid = valid;
        s.posture_stable_since = valid.then_some(t);
        if valid {
            self.revalidated(s, t, "posture");
        }
        out.verdicts.push(Verdict::granted(if valid {
            "posture valid"
        } else {
            "posture invalid"
        }));
        if self.role_here(s) == Some(ActionRole::DeterminePosture) && !self.frozen(s) {
            self.complete_action(s, out, t);
        }
    }

    fn on_movement(&self, s: &mut ExecState, out: &mut StepResult, e: &Event) {
        let t = e.t;
        s.posture_valid = false;
        if self.enforce {
            self.halt_motion(s, out, t);
            self.abort_exposure(s, out, t);
        }
        s.posture_stable_since = None;
        self.require_revalidation(s);
        out.verdicts.push(Verdict::granted("posture disturbed").cite("R23"));
        if self.enforce && self.role_here(s).is_some_and(ActionRole::in_positioning_cycle) {
            s.interruption_latch = true;
            if !s.interruption_active {
                self.route_via(s, out, "interruptionHRI", t);
            }
        }
    }

    fn on_exposure_request(&self, s: &mut ExecState, out: &mut StepResult, e: &Event) {
        let t = e.t;
        if e.source != Source::Radiographer {
            out.verdicts
                .push(Verdict::ignored("exposure requests are accepted from the radiographer only"));
            return;
        }
        if self.enforce {
            if self.frozen(s) {
                return self.refuse(s, out, t, "R14", "exposure requested during protective stop".into());
            }
            if self.role_here(s) != Some(ActionRole::Exposure) {
                return self.refuse(
                    s,
                    out,
                    t,
                    "R24",
                    format!("exposure requested out of sequence at {}", s.current_node),
                );
            }
            if s.exposure_active() {
                return self.refuse(s, out, t, "R24", "exposure already in progress".into());
            }
            let gate = gate_exposure(s);
            if !gate.allowed {
                let req = gate.cites().unwrap_or("R24");
                return self.refuse(s, out, t, req, format!("exposure gate failed: {:?}", gate.failed_conditions));
            }
        }
        s.exposure_locked = false;
        s.ledger.consume(LedgerAction::Exposure);
        out.actions.push(EmittedAction::TriggerExposure);
        let view = s.current_view.map(View::as_str).unwrap_or("-");
        s.log.append(t, LogKind::Exposure, None, format!("exposure triggered ({view})"));
        out.verdicts.push(Verdict::granted("exposure triggered").cite("R24"));
    }

    fn on_exposure_complete(&self, s: &mut ExecState, out: &mut StepResult, e: &Event) {
        let t = e.t;
        if !s.exposure_active() {
            out.verdicts.push(Verdict::ignored("no exposure in progress"));
            return;
        }
        s.exposure_locked = true;
        let ok = e.valid();
        if let Some(view) = s.current_view {
            if ok {
                s.views_acquired.insert(view);
                s.retake_pending = false;
            } else {
                let n = s.retake_count.entry(view).or_insert(0);
                *n += 1;
                if *n > self.cfg.retake_bound {
                    s.retake_pending = false;
                    s.abandoned = true;
                    s.safe_release_pending = true;
                    s.log.append(t, LogKind::Abandon, None, format!("retake bound exceeded for {view}"));
                } else {
                    s.retake_pending = true;
                }
            }
        }
        s.log.append(
            t,
            LogKind::Exposure,
            None,
            if ok { "image accepted" } else { "image rejected" },
        );
        out.verdicts.push(Verdict::granted("exposure complete"));
        if self.role_here(s) == Some(ActionRole::Exposure) && !self.frozen(s) {
            self.complete_action(s, out, t);
        }
    }

    fn try_resume(&self, s: &mut ExecState, out: &mut StepResult, t: Millis) {
        if !s.interruption_active {
            out.verdicts.push(Verdict::ignored("no active stop"));
            return;
        }
        if self.enforce {
            let required = self.cfg.required_sources(LedgerAction::Resume);
            let missing = s
                .ledger
                .missing(LedgerAction::Resume, &required, t, s.staleness_window_ms);
            if !missing.is_empty() {
                return self.refuse(s, out, t, "R20", format!("resume needs fresh confirmation from {missing:?}"));
            }
        }
        s.interruption_active = false;
        s.stopped_at = None;
        s.ledger.consume(LedgerAction::Resume);
        self.require_revalidation(s);
        out.actions.push(EmittedAction::Resume);
        s.log.append(t, LogKind::Resume, None, "resumed after stop");
        out.verdicts.push(Verdict::granted("resumed").cite("R23"));
        if self.enforce && s.interruption_latch {
            if !self.route_via(s, out, "interruptionHRI", t) {
                s.interruption_latch = false;
            }
        }
    }

    fn on_command(&self, s: &mut ExecState, out: &mut StepResult, e: &Event) {
        let t = e.t;
        let Some(cmd) = e.payload.command else {
            out.verdicts.push(Verdict::ignored("command without payload"));
            return;
        };
        let role = self.role_here(s);
        let workflow = |expected: ActionRole, source: Source| role == Some(expected) && e.source == source;
        match cmd {
            Command::SelfTest | Command::Stage | Command::Plan => {
                let (expected, _) = match cmd {
                    Command::SelfTest => (ActionRole::Initialise, ()),
                    Command::Stage => (ActionRole::IdentifyStage, ()),
                    _ => (ActionRole::PlanTrajectory, ()),
                };
                if !workflow(expected, Source::System) {
                    out.verdicts.push(Verdict::ignored(format!("{cmd:?} not expected here")));
                    return;
                }
                if self.frozen(s) {
                    return self.refuse(s, out, t, "R14", format!("{cmd:?} during protective stop"));
                }
                match cmd {
                    Command::SelfTest => {
                        s.system_ready = e.valid();
                        out.verdicts.push(Verdict::granted("self-test reported"));
                    }
                    Command::Stage => {
                        let view = e.payload.view.as_deref().and_then(|v| v.parse::<View>().ok());
                        s.current_view = view;
                        s.stage_identified = e.valid()
                            && view.is_some_and(|v| {
                                self.cfg.required_views.contains(&v) && !s.views_acquired.contains(&v)
                            });
                        out.verdicts.push(Verdict::granted("stage reported").cite("R2"));
                    }
                    _ => {
                        if self.enforce {
                            let gate = gate_plan(s);
                            if !gate.allowed {
                                let req = gate.cites().unwrap_or("R21");
                                return self.refuse(
                                    s,
                                    out,
                                    t,
                                    req,
                                    format!("plan acceptance gate failed: {:?}", gate.failed_conditions),
                                );
                            }
                        }
                        let valid = e.valid();
                        s.trajectory_valid = valid;
                        out.actions.push(EmittedAction::AcceptPlan { valid });
                        if valid {
                            self.revalidated(s, t, "trajectory");
                        }
                        out.verdicts.push(Verdict::granted("plan evaluated").cite("R21"));
                    }
                }
                self.complete_action(s, out, t);
            }
            Command::MotionStart => {
                s.ledger.record(LedgerAction::MotionStart, e.source, t);
                if e.source != Source::Radiographer {
                    out.verdicts.push(Verdict::granted("motion confirmation recorded"));
                    return;
                }
                if self.enforce {
                    if self.frozen(s) {
                        return self.refuse(s, out, t, "R14", "motion requested during protective stop".into());
                    }
                    if role != Some(ActionRole::ArmMotion) {
                        return self.refuse(
                            s,
                            out,
                            t,
                            "R1",
                            format!("motion requested out of sequence at {}", s.current_node),
                        );
                    }
                    if s.arm_moving {
                        out.verdicts.push(Verdict::ignored("motion already in progress"));
                        return;
                    }
                    let gate = gate_motion(s, self.cfg);
                    if !gate.allowed {
                        let req = gate.cites().unwrap_or("R3");
                        return self.refuse(s, out, t, req, format!("motion gate failed: {:?}", gate.failed_conditions));
                    }
                }
                s.arm_moving = true;
                s.compliance_mode = false;
                s.ledger.consume(LedgerAction::MotionStart);
                out.actions.push(EmittedAction::StartMotion);
                s.log.append(t, LogKind::Motion, None, "motion started");
                out.verdicts.push(Verdict::granted("motion started").cite("R1"));
            }
            Command::Exposure => {
                s.ledger.record(LedgerAction::Exposure, e.source, t);
                out.verdicts.push(Verdict::granted("exposure confirmation recorded"));
            }
            Command::Release => {
                s.ledger.record(LedgerAction::Release, e.source, t);
                if e.source != Source::Radiographer {
                    out.verdicts.push(Verdict::granted("release confirmation recorded"));
                    return;
                }
                self.release_patient(s, out, t);
            }
            Command::RequestAdjustment => {
                if e.source == Source::Radiographer {
                    s.adjustments_requested = true;
                    out.verdicts.push(Verdict::granted("adjustment requested").cite("R5"));
                } else {
                    out.verdicts.push(Verdict::ignored("adjustments are requested by the radiographer"));
                }
            }
            Command::Advance => {
                if !matches!(role, Some(ActionRole::Adjustment | ActionRole::Generic)) {
                    out.verdicts.push(Verdict::ignored("nothing to advance"));
                    return;
                }
                if self.frozen(s) {
                    return self.refuse(s, out, t, "R14", "advance during protective stop".into());
                }
                out.verdicts.push(Verdict::granted("step completed"));
                self.complete_action(s, out, t);
            }
            Command::SetGuard => match &e.payload.guard {
                Some(g) => {
                    s.custom_guards.insert(g.clone(), e.valid());
                    out.verdicts.push(Verdict::granted(format!("guard {g} set")));
                }
                None => out.verdicts.push(Verdict::ignored("setGuard without guard name")),
            },
        }
    }

    /// Nominal (radiographer-confirmed) release. Refused mid-motion, with a
    /// retake pending, during a stop, or without fresh confirmations.
    pub fn release_patient(&self, s: &mut ExecState, out: &mut StepResult, t: Millis) {
        let at_release = self.role_here(s) == Some(ActionRole::Release);
        if self.enforce {
            if self.frozen(s) {
                return self.refuse(s, out, t, "R14", "release during protective stop".into());
            }
            if !at_release {
                return self.refuse(s, out, t, "R25", format!("release requested at {}", s.current_node));
            }
            if s.arm_moving {
                return self.refuse(s, out, t, "R25", "release requested while the arm is moving".into());
            }
            if s.retake_pending {
                return self.refuse(s, out, t, "R25", "release requested with a retake pending".into());
            }
            let required = self.cfg.required_sources(LedgerAction::Release);
            let missing = s.ledger.missing(LedgerAction::Release, &required, t, s.staleness_window_ms);
            if !missing.is_empty() {
                return self.refuse(s, out, t, "R20", format!("release needs fresh confirmation from {missing:?}"));
            }
        }
        self.halt_motion(s, out, t);
        s.compliance_mode = true;
        s.ledger.consume(LedgerAction::Release);
        out.actions.push(EmittedAction::ReleasePatient { safe_path: false });
        s.log.append(t, LogKind::Release, None, "patient released");
        out.verdicts.push(Verdict::granted("patient released").cite("R25"));
        if at_release {
            self.complete_action(s, out, t);
        }
    }

    /// Non-bypassable stop: succeeds in every state.
    pub fn request_protective_stop(
        &self,
        s: &mut ExecState,
        source: Source,
        t: Millis,
    ) -> Result<StepResult, ExecError> {
        self.handle_event(s, &Event::new(t, source, EventKind::UiStop))
    }

    /// Record the given confirmations and attempt to resume.
    pub fn resume_after_stop(
        &self,
        s: &mut ExecState,
        confirmations: &[(Source, Millis)],
    ) -> Result<StepResult, ExecError> {
        let mut total = StepResult::default();
        let mut sorted = confirmations.to_vec();
        sorted.sort_by_key(|(_, t)| *t);
        let Some(last) = sorted.len().checked_sub(1) else {
            let mut out = StepResult::default();
            self.try_resume(s, &mut out, s.clock);
            return Ok(out);
        };
        for (i, (source, t)) in sorted.into_iter().enumerate() {
            if i < last {
                // record without attempting: only the final confirmation triggers the resume
                if t < s.clock {
                    return Err(ExecError::TimestampRegression { event: t, clock: s.clock });
                }
                s.clock = t;
                s.ledger.record(LedgerAction::Resume, source, t);
                s.log.append(t, LogKind::Confirmation, None, format!("{source} resumeRequest"));
                continue;
            }
            let r = self.handle_event(s, &Event::new(t, source, EventKind::ResumeRequest))?;
            total.actions.extend(r.actions);
            total.verdicts.extend(r.verdicts);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;
    use crate::exec::{stabilization_elapsed, Command};

    fn canon() -> ProcessModel {
        data::canonical_model()
    }

    fn drive(x: &Executive, s: &mut ExecState, events: &[Event]) -> Vec<StepResult> {
        events.iter().map(|e| x.handle_event(s, e).unwrap()).collect()
    }

    fn to_arm_positioning(x: &Executive, s: &mut ExecState) {
        drive(
            x,
            s,
            &[
                Event::command(0, Source::System, Command::SelfTest),
                Event::command(100, Source::System, Command::Stage).with_view(View::Cc),
                Event::new(200, Source::Sensor, EventKind::PostureUpdate).with_valid(true),
                Event::command(2300, Source::System, Command::Plan).with_valid(true),
            ],
        );
    }

    #[test]
    fn init_lands_on_first_action() {
        let m = canon();
        let cfg = ExecConfig::default();
        let s = init_executive(&m, &cfg).unwrap();
        assert_eq!(s.current_node, "system_initialisation");
        assert!(s.exposure_locked);
        assert!(!s.system_ready);
        assert!(s.ledger.is_empty());
    }

    #[test]
    fn zero_window_config_accepted() {
        let m = canon();
        let cfg = ExecConfig {
            stabilization_window_ms: 0,
            ..ExecConfig::default()
        };
        let s = init_executive(&m, &cfg).unwrap();
        assert_eq!(s.stabilization_window_ms, 0);
        assert!(!stabilization_elapsed(&s, 0));
    }

    #[test]
    fn failed_self_test_waits() {
        let m = canon();
        let cfg = ExecConfig::default();
        let x = Executive::new(&m, &cfg, true);
        let mut s = x.init().unwrap();
        drive(&x, &mut s, &[Event::command(0, Source::System, Command::SelfTest).with_valid(false)]);
        assert_eq!(s.current_node, "system_initialisation");
        drive(&x, &mut s, &[Event::command(10, Source::System, Command::SelfTest)]);
        assert_eq!(s.current_node, "identify_process_stage");
    }

    #[test]
    fn fault_during_motion_halts_and_takes_recovery_path() {
        let m = canon();
        let cfg = ExecConfig::default();
        let x = Executive::new(&m, &cfg, true);
        let mut s = x.init().unwrap();
        to_arm_positioning(&x, &mut s);
        assert_eq!(s.current_node, "perform_arm_positioning");
        drive(
            &x,
            &mut s,
            &[
                Event::new(2400, Source::Patient, EventKind::Assent),
                Event::command(2500, Source::Radiographer, Command::MotionStart),
            ],
        );
        assert!(s.arm_moving);
        let faults_before = s.log.count(LogKind::Fault);
        let r = x
            .handle_event(&mut s, &Event::new(2600, Source::Sensor, EventKind::Fault))
            .unwrap();
        assert!(!s.arm_moving);
        assert!(r.actions.contains(&EmittedAction::HaltMotion));
        assert!(r.actions.contains(&EmittedAction::ReleasePatient { safe_path: true }));
        assert!(s.compliance_mode);
        assert_eq!(s.log.count(LogKind::Fault), faults_before + 1);
        assert_eq!(s.current_node, "identify_process_stage");
    }

    #[test]
    fn motion_refused_during_stop_cites_r14() {
        let m = canon();
        let cfg = ExecConfig::default();
        let x = Executive::new(&m, &cfg, true);
        let mut s = x.init().unwrap();
        to_arm_positioning(&x, &mut s);
        x.request_protective_stop(&mut s, Source::Patient, 2400).unwrap();
        assert!(s.interruption_active);
        let r = x
            .handle_event(&mut s, &Event::command(2500, Source::Radiographer, Command::MotionStart))
            .unwrap();
        assert!(r.actions.is_empty());
        assert_eq!(r.verdicts[0].status, VerdictStatus::Refused);
        assert_eq!(r.verdicts[0].requirement.as_deref(), Some("R14"));
    }

    #[test]
    fn resume_needs_both_fresh_confirmations() {
        let m = canon();
        let cfg = ExecConfig::default();
        let x = Executive::new(&m, &cfg, true);
        let mut s = x.init().unwrap();
        to_arm_positioning(&x, &mut s);
        x.request_protective_stop(&mut s, Source::Radiographer, 3000).unwrap();
        let r = x.resume_after_stop(&mut s, &[(Source::Radiographer, 3100)]).unwrap();
        assert!(r.refused());
        assert!(s.interruption_active);

        let mut stale = s.clone();
        let r = x
            .resume_after_stop(&mut stale, &[(Source::Patient, 3200), (Source::Radiographer, 14_000)])
            .unwrap();
        assert!(r.refused(), "patient confirmation older than the staleness window");

        let r = x.resume_after_stop(&mut s, &[(Source::Patient, 3200)]).unwrap();
        assert!(!r.refused());
        assert!(!s.interruption_active);
        assert!(s.revalidation_required);
        assert_eq!(s.current_node, "determine_patient_posture");
    }

    #[test]
    fn double_stop_logs_twice() {
        let m = canon();
        let cfg = ExecConfig::default();
        let x = Executive::new(&m, &cfg, true);
        let mut s = x.init().unwrap();
        x.request_protective_stop(&mut s, Source::Patient, 10).unwrap();
        x.request_protective_stop(&mut s, Source::Patient, 20).unwrap();
        assert!(s.interruption_active);
        assert_eq!(s.log.count(LogKind::Interruption), 2);
    }

    #[test]
    fn release_mid_motion_refused_and_abandon_releases() {
        let m = canon();
        let cfg = ExecConfig::default();
        let x = Executive::new(&m, &cfg, true);
        let mut s = x.init().unwrap();
        to_arm_positioning(&x, &mut s);
        drive(
            &x,
            &mut s,
            &[
                Event::new(2400, Source::Patient, EventKind::Assent),
                Event::command(2500, Source::Radiographer, Command::MotionStart),
            ],
        );
        let mut out = StepResult::default();
        x.release_patient(&mut s, &mut out, 2600);
        assert!(out.refused());
        assert!(!s.compliance_mode);

        let r = x
            .handle_event(&mut s, &Event::new(2700, Source::Radiographer, EventKind::AbandonSession))
            .unwrap();
        assert!(r.actions.contains(&EmittedAction::ReleasePatient { safe_path: true }));
        assert!(s.compliance_mode);
        assert!(!s.arm_moving);
        assert!(s.finished);
    }

    #[test]
    fn timestamp_regression_is_an_error() {
        let m = canon();
        let cfg = ExecConfig::default();
        let x = Executive::new(&m, &cfg, true);
        let mut s = x.init().unwrap();
        x.handle_event(&mut s, &Event::new(50, Source::System, EventKind::Tick)).unwrap();
        assert!(x.handle_event(&mut s, &Event::new(40, Source::System, EventKind::Tick)).is_err());
    }
}
