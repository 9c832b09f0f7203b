use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::run::Trace;
use crate::exec::{
    ActionRole, Command, ConfirmationLedger, EmittedAction, Event, EventKind, ExecConfig,
    LedgerAction, LogKind, Millis, Source,
};
use crate::model::ProcessModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MonitorStatus {
    Satisfied,
    Violated,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Witness {
    /// Trace step index, or the step count for end-of-trace findings.
    pub index: usize,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonitorVerdict {
    pub requirement: String,
    pub status: MonitorStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub checks: usize,
    /// Report-only observations from soft monitors.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<String>,
}

/// Registry monitor bindings and the requirements each one reports on.
pub const MONITOR_BINDINGS: &[(&str, &[&str])] = &[
    ("commandGating", &["R1"]),
    ("motionInterlock", &["R3"]),
    ("logCompleteness", &["R8"]),
    ("protectiveStop", &["R14"]),
    ("exposureInterlock", &["R16", "R24"]),
    ("delayNotice", &["R18", "R19"]),
    ("multiSourceConfirmation", &["R20"]),
    ("stabilizationWindow", &["R21"]),
    ("revalidation", &["R23"]),
    ("safePosture", &["R25"]),
    ("authorityVisibility", &["R26"]),
];

/// Requirements whose monitors only report and never fail.
pub const SOFT_MONITORS: [&str; 2] = ["R18", "R19"];

/// Requirements the executive must never violate.
pub const HARD_REQUIREMENTS: [&str; 6] = ["R14", "R20", "R21", "R23", "R24", "R25"];

pub fn monitored_requirements() -> Vec<&'static str> {
    let mut v: Vec<&str> = MONITOR_BINDINGS.iter().flat_map(|(_, r)| r.iter().copied()).collect();
    v.sort_by_key(|r| r[1..].parse::<u32>().unwrap_or(0));
    v
}

#[derive(Default)]
struct Tally {
    checks: usize,
    witness: Option<Witness>,
    notices: Vec<String>,
}

#[derive(Default)]
struct Book {
    tallies: BTreeMap<&'static str, Tally>,
}

impl Book {
    fn check(&mut self, req: &'static str, ok: bool, index: usize, why: impl FnOnce() -> String) {
        let t = self.tallies.entry(req).or_default();
        t.checks += 1;
        if !ok && t.witness.is_none() {
            t.witness = Some(Witness {
                index,
                explanation: why(),
            });
        }
    }

    fn notice(&mut self, req: &'static str, text: String) {
        let t = self.tallies.entry(req).or_default();
        t.checks += 1;
        t.notices.push(text);
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Pending {
    posture: bool,
    trajectory: bool,
    readiness: bool,
}

impl Pending {
    const ALL: Pending = Pending {
        posture: true,
        trajectory: true,
        readiness: true,
    };

    fn any(self) -> bool {
        self.posture || self.trajectory || self.readiness
    }
}

/// Independent reconstruction of the safety-relevant state from inputs and
/// emitted actions alone.
#[derive(Debug, Clone, Default)]
struct Shadow {
    posture_valid: bool,
    since: Option<Millis>,
    arm_moving: bool,
    exposure_active: bool,
    fault: bool,
    interrupted: bool,
    compliance: bool,
    pending: Pending,
    ledger: ConfirmationLedger,
}

impl Shadow {
    fn observe(&mut self, e: &Event) {
        let t = e.t;
        match e.kind {
            EventKind::PostureUpdate => {
                let v = e.valid();
                self.posture_valid = v;
                self.since = v.then_some(t);
                if v {
                    self.pending.posture = false;
                }
            }
            EventKind::PostureUnstable | EventKind::MovementDetected => {
                self.posture_valid = false;
                self.since = None;
                self.pending = Pending::ALL;
            }
            EventKind::VoiceStop | EventKind::UiStop => {
                self.interrupted = true;
                self.since = None;
                self.pending = Pending::ALL;
            }
            EventKind::Fault => {
                self.fault = true;
                self.pending = Pending::ALL;
            }
            EventKind::FaultCleared => self.fault = false,
            EventKind::Assent if e.source == Source::Patient => {
                for a in [LedgerAction::MotionStart, LedgerAction::Exposure, LedgerAction::Release] {
                    self.ledger.record(a, Source::Patient, t);
                }
                self.pending.readiness = false;
            }
            EventKind::AssentWithdrawn if e.source == Source::Patient => {
                self.ledger.clear_source(Source::Patient);
            }
            EventKind::ResumeRequest => self.ledger.record(LedgerAction::Resume, e.source, t),
            EventKind::ExposureComplete => self.exposure_active = false,
            EventKind::CommandConfirm => {
                let a = match e.payload.command {
                    Some(Command::MotionStart) => Some(LedgerAction::MotionStart),
                    Some(Command::Exposure) => Some(LedgerAction::Exposure),
                    Some(Command::Release) => Some(LedgerAction::Release),
                    _ => None,
                };
                if let Some(a) = a {
                    self.ledger.record(a, e.source, t);
                }
            }
            _ => {}
        }
    }

    fn confirmed(&self, cfg: &ExecConfig, a: LedgerAction, now: Millis) -> bool {
        cfg.required_sources(a).iter().all(|s| {
            self.ledger
                .received_at(a, *s)
                .is_some_and(|t| t <= now && now - t <= cfg.staleness_window_ms)
        })
    }

    fn settled(&self, cfg: &ExecConfig, now: Millis) -> bool {
        self.since
            .is_some_and(|s| now >= s && now - s >= cfg.stabilization_window_ms)
    }

    fn exposure_conjuncts(&self, cfg: &ExecConfig, now: Millis) -> Vec<&'static str> {
        let fresh = |src| {
            self.ledger
                .received_at(LedgerAction::Exposure, src)
                .is_some_and(|t| t <= now && now - t <= cfg.staleness_window_ms)
        };
        let mut failed = Vec::new();
        for (ok, name) in [
            (self.posture_valid, "posture valid"),
            (self.settled(cfg, now), "stabilisation elapsed"),
            (!self.arm_moving, "arms immobile"),
            (fresh(Source::Patient), "patient assent"),
            (fresh(Source::Radiographer), "radiographer confirmation"),
            (!self.fault, "no fault"),
            (!self.interrupted, "no interruption"),
            (!self.pending.any(), "revalidated"),
        ] {
            if !ok {
                failed.push(name);
            }
        }
        failed
    }

    fn motion_conjuncts(&self, cfg: &ExecConfig, now: Millis) -> Vec<&'static str> {
        let mut failed = Vec::new();
        for (ok, name) in [
            (self.posture_valid, "posture valid"),
            (!self.interrupted, "no interruption"),
            (!self.fault, "no fault"),
            (!self.pending.any(), "revalidated"),
            (self.confirmed(cfg, LedgerAction::MotionStart, now), "motion confirmations"),
        ] {
            if !ok {
                failed.push(name);
            }
        }
        failed
    }
}

/// Evaluate every monitor in [`MONITOR_BINDINGS`] over `trace`.
pub fn evaluate_monitors(m: &ProcessModel, cfg: &ExecConfig, trace: &Trace) -> Vec<MonitorVerdict> {
    let mut book = Book::default();
    let mut sh = Shadow::default();
    let budget = cfg.stop_latency_budget_ms;
    // (stop step index, deadline) while the stop state has not been reached
    let mut stop_deadline: Option<(usize, Millis)> = None;
    let mut stopped_since: Option<(usize, Millis)> = None;
    let role_of = |node: &str| {
        m.node(node)
            .filter(|n| n.kind == crate::model::NodeKind::Action)
            .map(|n| cfg.role_of(&n.id))
    };

    for (i, step) in trace.steps.iter().enumerate() {
        let e = &step.event;
        let t = e.t;
        if let Some((at, deadline)) = stop_deadline {
            if t > deadline {
                book.check("R14", false, at, || {
                    format!("stop at step {at} not reached within {budget} ms: arm moving or exposure active at t={t}")
                });
                stop_deadline = None;
            }
        }
        let was_moving = sh.arm_moving;
        let was_exposing = sh.exposure_active;
        sh.observe(e);

        // expected responses, judged on the state after bookkeeping
        let role = role_of(&step.node_before);
        let live = !trace_step_finished_before(trace, i);
        let mut expect_motion = false;
        let mut expect_exposure = false;
        if live && e.source == Source::Radiographer {
            if e.command_kind() == Some(Command::MotionStart)
                && role == Some(ActionRole::ArmMotion)
                && !was_moving
                && sh.motion_conjuncts(cfg, t).is_empty()
            {
                expect_motion = true;
            }
            if e.kind == EventKind::ExposureRequest
                && role == Some(ActionRole::Exposure)
                && !was_exposing
                && sh.exposure_conjuncts(cfg, t).is_empty()
            {
                expect_exposure = true;
            }
        }

        for a in &step.actions {
            match a {
                EmittedAction::StartMotion => {
                    let failed = sh.motion_conjuncts(cfg, t);
                    book.check("R1", failed.is_empty(), i, || format!("motion started with {failed:?} unmet"));
                    book.check("R3", sh.posture_valid && !sh.interrupted, i, || {
                        "motion started without valid posture or during a stop".into()
                    });
                    book.check("R14", !sh.interrupted, i, || "motion started before a confirmed resume".into());
                    let ok = sh.confirmed(cfg, LedgerAction::MotionStart, t);
                    book.check("R20", ok, i, || "motion started without fresh multi-source confirmation".into());
                    book.check("R23", !sh.pending.any(), i, || {
                        format!("motion started with revalidation outstanding {:?}", sh.pending)
                    });
                    sh.arm_moving = true;
                    sh.compliance = false;
                    sh.ledger.consume(LedgerAction::MotionStart);
                }
                EmittedAction::TriggerExposure => {
                    let failed = sh.exposure_conjuncts(cfg, t);
                    let ok = failed.is_empty();
                    book.check("R1", ok, i, || format!("exposure triggered with {failed:?} unmet"));
                    book.check("R16", ok, i, || format!("exposure triggered with {failed:?} unmet"));
                    book.check("R24", ok, i, || format!("exposure triggered with {failed:?} unmet"));
                    book.check("R14", !sh.interrupted, i, || "exposure triggered before a confirmed resume".into());
                    let ok = sh.confirmed(cfg, LedgerAction::Exposure, t);
                    book.check("R20", ok, i, || "exposure triggered without fresh multi-source confirmation".into());
                    book.check("R21", sh.settled(cfg, t), i, || {
                        format!("exposure triggered {} ms after posture settled", sh.since.map_or(0, |s| t.saturating_sub(s)))
                    });
                    book.check("R23", !sh.pending.any(), i, || {
                        format!("exposure triggered with revalidation outstanding {:?}", sh.pending)
                    });
                    sh.exposure_active = true;
                    sh.ledger.consume(LedgerAction::Exposure);
                }
                EmittedAction::AcceptPlan { valid } => {
                    book.check("R21", sh.settled(cfg, t), i, || "plan accepted before the stabilisation window elapsed".into());
                    if *valid {
                        sh.pending.trajectory = false;
                    }
                }
                EmittedAction::HaltMotion | EmittedAction::MotionCompleted => {
                    sh.arm_moving = false;
                    sh.since = sh.since.map(|_| t);
                }
                EmittedAction::AbortExposure => sh.exposure_active = false,
                EmittedAction::EnterCompliance => sh.compliance = true,
                EmittedAction::ReleasePatient { safe_path } => {
                    if !safe_path {
                        let ok = sh.confirmed(cfg, LedgerAction::Release, t);
                        book.check("R20", ok, i, || "release without fresh multi-source confirmation".into());
                        sh.ledger.consume(LedgerAction::Release);
                    }
                    sh.compliance = true;
                }
                EmittedAction::Resume => {
                    let ok = sh.confirmed(cfg, LedgerAction::Resume, t);
                    book.check("R20", ok, i, || "resumed without fresh multi-source confirmation".into());
                    sh.interrupted = false;
                    sh.ledger.consume(LedgerAction::Resume);
                    sh.pending = Pending::ALL;
                    if let Some((at, since)) = stopped_since.take() {
                        if t - since > 10_000 {
                            book.notice("R19", format!("stop at step {at} held {} ms before resume", t - since));
                        }
                    }
                }
            }
        }

        if expect_motion {
            let ok = step.actions.contains(&EmittedAction::StartMotion);
            book.check("R1", ok, i, || "gated motion command not executed within the response budget".into());
        }
        if expect_exposure {
            let ok = step.actions.contains(&EmittedAction::TriggerExposure);
            book.check("R1", ok, i, || "gated exposure request not executed within the response budget".into());
        }

        if e.kind.is_stop() {
            if stopped_since.is_none() {
                stopped_since = Some((i, t));
            }
            if sh.arm_moving || sh.exposure_active {
                stop_deadline = stop_deadline.or(Some((i, t + budget)));
            } else {
                book.check("R14", true, i, String::new);
            }
        } else if stop_deadline.is_some() && !sh.arm_moving && !sh.exposure_active {
            book.check("R14", true, i, String::new);
            stop_deadline = None;
        }
        if live && (e.kind.is_stop() || e.kind == EventKind::Fault || e.kind == EventKind::AbandonSession) {
            book.check("R25", sh.compliance && !sh.arm_moving, i, || {
                format!("{} not followed by compliant safe posture", e.kind)
            });
        }
        if role == Some(ActionRole::Adjustment) {
            if let Some(next) = trace.steps.get(i + 1) {
                let gap = next.event.t - t;
                if gap > cfg.command_response_budget_ms {
                    book.notice("R18", format!("{gap} ms without feedback during adjustments at step {i}"));
                }
            }
        }
    }
    if let Some((at, _)) = stop_deadline {
        if sh.arm_moving || sh.exposure_active {
            book.check("R14", false, at, || format!("stop at step {at} never reached the stop state"));
        }
    }

    let end = trace.steps.len();
    // R8: every loggable input appears exactly once, in order, append-only.
    let mut expected: BTreeMap<(Millis, LogKind), usize> = BTreeMap::new();
    for s in &trace.steps {
        if let Some(k) = s.event.kind.log_kind() {
            *expected.entry((s.event.t, k)).or_default() += 1;
        }
    }
    let loggable: BTreeSet<LogKind> = crate::exec::EventKind::ALL
        .iter()
        .filter_map(|k| k.log_kind())
        .collect();
    let mut logged: BTreeMap<(Millis, LogKind), usize> = BTreeMap::new();
    for l in trace.log.entries() {
        if loggable.contains(&l.kind) {
            *logged.entry((l.t, l.kind)).or_default() += 1;
        }
    }
    book.check("R8", expected == logged, end, || "session log differs from loggable inputs".into());
    let ordered = trace.log.entries().windows(2).all(|w| w[0].t <= w[1].t);
    book.check("R8", ordered, end, || "session log timestamps decrease".into());

    for l in trace.log.entries().iter().filter(|l| l.kind == LogKind::StageTransition) {
        book.check("R26", l.actor.is_some(), end, || format!("stage transition `{}` has no actor", l.details));
    }

    monitored_requirements()
        .into_iter()
        .map(|req| {
            let t = book.tallies.remove(req).unwrap_or_default();
            let soft = SOFT_MONITORS.contains(&req);
            let status = if t.witness.is_some() && !soft {
                MonitorStatus::Violated
            } else if t.checks > 0 {
                MonitorStatus::Satisfied
            } else {
                MonitorStatus::NotApplicable
            };
            MonitorVerdict {
                requirement: req.to_string(),
                status,
                witness: if soft { None } else { t.witness },
                checks: t.checks,
                notices: t.notices,
            }
        })
        .collect()
}

fn trace_step_finished_before(trace: &Trace, i: usize) -> bool {
    if i == 0 {
        trace.initial.finished
    } else {
        trace.steps[i - 1].state.finished
    }
}
