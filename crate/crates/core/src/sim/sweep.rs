use serde::{Deserialize, Serialize};

use super::timeline::nominal_timeline;
use crate::exec::{
    ActionRole, Command, EmittedAction, Event, EventKind, ExecConfig, ExecError, ExecState,
    Executive, LogKind, Millis, Source,
};
use crate::model::{NodeKind, ProcessModel};

/// Delay between the stop and the first attempt to act through it.
const PROBE_GAP_MS: Millis = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub node: String,
    pub kind: NodeKind,
    /// Time from the stop request to the stop state, `None` if never reached.
    pub stop_latency_ms: Option<Millis>,
    pub stop_logged: bool,
    pub premature_actions: Vec<String>,
    pub partial_resume_refused: bool,
    pub resumed: bool,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepReport {
    pub executive_enabled: bool,
    pub budget_ms: Millis,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().map(|r| r.violations.len()).sum()
    }
}

fn in_stop_state(s: &ExecState) -> bool {
    s.interruption_active && !s.arm_moving && !s.exposure_active()
}

/// State partway through the first positioning cycle, moved to `node` with
/// the arm moving only at arm motion nodes and an exposure in flight only at
/// exposure nodes.
fn staged_state(x: &Executive, node: &str) -> Result<(ExecState, Millis), ExecError> {
    let mut s = x.init()?;
    let mut last = 0;
    for e in nominal_timeline() {
        last = e.t;
        x.handle_event(&mut s, &e)?;
        if e.payload.command == Some(Command::MotionStart) {
            break;
        }
    }
    let role = x.cfg.role_of(node);
    s.current_node = node.to_string();
    s.arm_moving = role == ActionRole::ArmMotion;
    s.exposure_locked = role != ActionRole::Exposure;
    Ok((s, last + PROBE_GAP_MS))
}

/// Inject a protective stop at every process node, then try to move and
/// expose through it, send a radiographer-only resume, try again, and
/// finally complete the resume with the patient's confirmation.
pub fn stop_sweep(
    m: &ProcessModel,
    cfg: &ExecConfig,
    executive_enabled: bool,
) -> Result<SweepReport, ExecError> {
    let x = Executive::new(m, cfg, executive_enabled);
    let budget = cfg.stop_latency_budget_ms;
    let mut rows = Vec::new();
    for node in m.process_nodes() {
        let (mut s, t_stop) = staged_state(&x, &node.id)?;
        let log_before = s.log.entries().iter().filter(|e| e.kind == LogKind::Interruption).count();
        let mut latency = None;

        x.request_protective_stop(&mut s, Source::Patient, t_stop)?;
        if in_stop_state(&s) {
            latency = Some(0);
        }
        let stop_logged = s.log.entries().iter().filter(|e| e.kind == LogKind::Interruption).count() > log_before;

        let probes = |t: Millis| {
            vec![
                Event::new(t, Source::Patient, EventKind::Assent),
                Event::command(t + 10, Source::Radiographer, Command::MotionStart),
                Event::command(t + 20, Source::Radiographer, Command::Exposure),
                Event::new(t + 30, Source::Radiographer, EventKind::ExposureRequest),
                Event::new(t + 40, Source::Sensor, EventKind::MotionComplete),
            ]
        };
        let t1 = t_stop + PROBE_GAP_MS;
        let t_partial = t1 + 200;
        let t2 = t_partial + 100;
        let t_full = t2 + 200;
        let mut before_resume = probes(t1);
        before_resume.push(Event::new(t_partial, Source::Radiographer, EventKind::ResumeRequest));
        before_resume.extend(probes(t2));

        let mut premature = Vec::new();
        let mut partial_resume_refused = true;
        for e in &before_resume {
            let r = x.handle_event(&mut s, e)?;
            if latency.is_none() && in_stop_state(&s) {
                latency = Some(e.t - t_stop);
            }
            for a in &r.actions {
                match a {
                    EmittedAction::StartMotion | EmittedAction::TriggerExposure => {
                        premature.push(format!("{a:?} at t={}", e.t));
                    }
                    EmittedAction::Resume => partial_resume_refused = false,
                    _ => {}
                }
            }
        }
        let r = x.handle_event(&mut s, &Event::new(t_full, Source::Patient, EventKind::ResumeRequest))?;
        let resumed = r.actions.contains(&EmittedAction::Resume);

        let mut violations = Vec::new();
        match latency {
            Some(l) if l <= budget => {}
            Some(l) => violations.push(format!("stop state reached after {l} ms")),
            None => violations.push("stop state never reached".into()),
        }
        if !stop_logged {
            violations.push("stop not logged".into());
        }
        violations.extend(premature.iter().map(|p| format!("{p} before a confirmed resume")));
        if !partial_resume_refused {
            violations.push("resumed on a single confirmation".into());
        }
        if !resumed {
            violations.push("confirmed resume refused".into());
        }
        rows.push(SweepRow {
            node: node.label.clone(),
            kind: node.kind,
            stop_latency_ms: latency,
            stop_logged,
            premature_actions: premature,
            partial_resume_refused,
            resumed,
            violations,
        });
    }
    Ok(SweepReport {
        executive_enabled,
        budget_ms: budget,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;

    #[test]
    fn stop_honoured_at_every_node() {
        let (m, cfg) = (data::canonical_model(), data::canonical_config());
        let r = stop_sweep(&m, &cfg, true).unwrap();
        assert_eq!(r.rows.len(), 18);
        let bad: Vec<_> = r.rows.iter().filter(|r| !r.violations.is_empty()).collect();
        assert!(bad.is_empty(), "{bad:#?}");
        assert!(r.rows.iter().all(|r| r.stop_latency_ms == Some(0)));
    }

    #[test]
    fn sweep_detects_missing_enforcement() {
        let (m, cfg) = (data::canonical_model(), data::canonical_config());
        let r = stop_sweep(&m, &cfg, false).unwrap();
        let arm = r.rows.iter().find(|r| r.node == "Perform arm positioning").unwrap();
        assert!(!arm.violations.is_empty());
        assert!(r.violations() > 0);
    }
}
