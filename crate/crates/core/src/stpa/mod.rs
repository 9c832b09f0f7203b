//! STPA control structure, UCA candidate generation, catalog ingest and
//! requirement traceability.

mod catalog;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::normalize_label;

pub use catalog::{
    cue_applicability, load_uca_catalog, parse_cue_catalog, parse_uca_catalog, CueRecord,
    UcaCatalogError, UcaRecord, UcaRole,
};
pub use trace::{
    parse_trace_links, trace_to_requirements, ArtifactRef, LinkProvenance, LinkRelation,
    TraceDiagnostic, TraceLink, TraceRow, TraceabilityMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UcaCategory {
    NotProvided,
    ProvidedUnsafe,
    WrongTimingOrSequence,
    WrongDurationOrPersistence,
}

impl UcaCategory {
    pub const ALL: [UcaCategory; 4] = [
        UcaCategory::NotProvided,
        UcaCategory::ProvidedUnsafe,
        UcaCategory::WrongTimingOrSequence,
        UcaCategory::WrongDurationOrPersistence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UcaCategory::NotProvided => "NotProvided",
            UcaCategory::ProvidedUnsafe => "ProvidedUnsafe",
            UcaCategory::WrongTimingOrSequence => "WrongTimingOrSequence",
            UcaCategory::WrongDurationOrPersistence => "WrongDurationOrPersistence",
        }
    }
}

impl fmt::Display for UcaCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UcaCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UcaCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| format!("unknown UCA category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Controller {
    Radiographer,
    Patient,
    SafetyExecutive,
}

impl Controller {
    pub const ALL: [Controller; 3] = [
        Controller::Radiographer,
        Controller::Patient,
        Controller::SafetyExecutive,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControlledProcess {
    RobotArms,
    XRayUnit,
    WorkflowState,
}

impl ControlledProcess {
    pub const ALL: [ControlledProcess; 3] = [
        ControlledProcess::RobotArms,
        ControlledProcess::XRayUnit,
        ControlledProcess::WorkflowState,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ControlAction {
    pub controller: Controller,
    pub name: String,
    pub target: ControlledProcess,
    /// Process-node labels this action is issued at. Empty means any node.
    #[serde(default)]
    pub nodes: Vec<String>,
    /// Noun form used in candidate templates, e.g. "exposure trigger".
    pub noun: String,
    /// Past-tense form, e.g. "exposure triggered".
    pub done: String,
    pub precondition: String,
    pub unsafe_context: String,
}

impl ControlAction {
    pub fn issued_at(&self, node_label: &str) -> bool {
        let key = normalize_label(node_label);
        self.nodes.is_empty() || self.nodes.iter().any(|n| normalize_label(n) == key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedbackChannel {
    pub source: ControlledProcess,
    pub signal: String,
    pub controller: Controller,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ControlStructure {
    pub controllers: Vec<Controller>,
    pub controlled_processes: Vec<ControlledProcess>,
    pub control_actions: Vec<ControlAction>,
    pub feedback_channels: Vec<FeedbackChannel>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StpaError {
    #[error("unknown control action {controller:?}/{action}")]
    UnknownAction { controller: Controller, action: String },
    #[error("control action {0} names a controller or target outside the structure")]
    DanglingAction(String),
    #[error("{id} at `{node}` has no matching {role} control action")]
    UnboundUca { id: String, node: String, role: UcaRole },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateStatus {
    Pending,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UcaCandidate {
    pub controller: Controller,
    pub action: String,
    pub category: UcaCategory,
    pub text: String,
    pub status: CandidateStatus,
}

type ActionRow = (
    Controller,
    &'static str,
    ControlledProcess,
    &'static [&'static str],
    &'static str,
    &'static str,
    &'static str,
    &'static str,
);

const CANONICAL_ACTIONS: &[ActionRow] = {
    use ControlledProcess::*;
    use Controller::*;
    &[
        (Radiographer, "initialise", WorkflowState, &["System initialisation"],
         "initialisation", "initialisation confirmed", "self-check completed", "warnings are active"),
        (Radiographer, "stageConfirm", WorkflowState, &["Identify process stage"],
         "stage confirmation", "stage confirmed", "previous view completed", "the stage does not match the arm pose"),
        (Radiographer, "postureConfirm", WorkflowState, &["Determine patient posture"],
         "posture confirmation", "posture accepted", "posture stabilised", "posture confidence is low"),
        (Radiographer, "planApproval", RobotArms, &["Trajectory planning"],
         "plan approval", "plan approved", "safety margins reviewed", "the trajectory violates margins"),
        (Radiographer, "motionStart", RobotArms, &["Perform arm positioning"],
         "motion start", "motion started", "patient assent received", "the patient is moving"),
        (Radiographer, "adjustment", RobotArms, &["Perform positioning adjustments"],
         "positioning adjustment", "adjustment applied", "image quality analysed", "the patient reports discomfort"),
        (Radiographer, "exposureTrigger", XRayUnit, &["Capture X-ray"],
         "exposure trigger", "exposure triggered", "posture stability confirmed", "the arm is moving"),
        (Radiographer, "release", RobotArms, &["\"Release\" patient"],
         "patient release", "patient released", "motion completed", "the image is not yet validated"),
        (Patient, "assent", WorkflowState, &[],
         "assent", "assent given", "instructions understood", "the patient is uncomfortable"),
        (Patient, "maintainPosture", RobotArms, &[],
         "posture hold", "posture held", "positioning completed", "the patient is in pain"),
        (Patient, "voiceStop", WorkflowState, &[],
         "stop request", "stop requested", "motion begins", "no hazard is present"),
        (SafetyExecutive, "planAcceptance", RobotArms, &["Trajectory planning"],
         "plan acceptance", "plan accepted", "stabilisation window elapsed", "posture is invalid"),
        (SafetyExecutive, "haltMotion", RobotArms, &[],
         "motion halt", "motion halted", "stop request received", "the arm is at a safe pose"),
        (SafetyExecutive, "exposureInterlock", XRayUnit, &["Capture X-ray"],
         "exposure unlock", "exposure unlocked", "all interlock conditions hold", "a conjunct fails"),
        (SafetyExecutive, "compliance", RobotArms, &[],
         "compliance mode", "compliance entered", "fault detected", "the patient is supported by the arms"),
    ]
};

impl ControlStructure {
    pub fn canonical() -> Self {
        let control_actions = CANONICAL_ACTIONS
            .iter()
            .map(|&(controller, name, target, nodes, noun, done, pre, ctx)| ControlAction {
                controller,
                name: name.into(),
                target,
                nodes: nodes.iter().map(|s| s.to_string()).collect(),
                noun: noun.into(),
                done: done.into(),
                precondition: pre.into(),
                unsafe_context: ctx.into(),
            })
            .collect();
        let fb = |source, signal: &str, controller| FeedbackChannel {
            source,
            signal: signal.into(),
            controller,
        };
        ControlStructure {
            controllers: Controller::ALL.to_vec(),
            controlled_processes: ControlledProcess::ALL.to_vec(),
            control_actions,
            feedback_channels: vec![
                fb(ControlledProcess::RobotArms, "arm pose and motion state", Controller::Radiographer),
                fb(ControlledProcess::RobotArms, "arm contact and pressure", Controller::Patient),
                fb(ControlledProcess::RobotArms, "motion complete", Controller::SafetyExecutive),
                fb(ControlledProcess::XRayUnit, "exposure status", Controller::Radiographer),
                fb(ControlledProcess::XRayUnit, "image quality", Controller::SafetyExecutive),
                fb(ControlledProcess::WorkflowState, "current stage", Controller::Radiographer),
                fb(ControlledProcess::WorkflowState, "posture estimate", Controller::SafetyExecutive),
                fb(ControlledProcess::WorkflowState, "spoken instructions", Controller::Patient),
            ],
        }
    }

    pub fn action(&self, controller: Controller, name: &str) -> Option<&ControlAction> {
        self.control_actions
            .iter()
            .find(|a| a.controller == controller && a.name == name)
    }

    pub fn validate(&self) -> Result<(), StpaError> {
        for a in &self.control_actions {
            if !self.controllers.contains(&a.controller)
                || !self.controlled_processes.contains(&a.target)
            {
                return Err(StpaError::DanglingAction(a.name.clone()));
            }
        }
        Ok(())
    }

    /// The control action a catalog UCA refers to: the role's controller
    /// issuing an action at the record's node. Node-specific actions win
    /// over workflow-wide ones.
    pub fn action_for(&self, uca: &UcaRecord) -> Option<&ControlAction> {
        let controller = uca.role.controller();
        let mut candidates = self
            .control_actions
            .iter()
            .filter(|a| a.controller == controller && a.issued_at(&uca.node_label));
        let first = candidates.next()?;
        if !first.nodes.is_empty() {
            return Some(first);
        }
        Some(candidates.find(|a| !a.nodes.is_empty()).unwrap_or(first))
    }

    pub fn bind_catalog(&self, ucas: &[UcaRecord]) -> Result<(), StpaError> {
        for u in ucas {
            if self.action_for(u).is_none() {
                return Err(StpaError::UnboundUca {
                    id: u.id.clone(),
                    node: u.node_label.clone(),
                    role: u.role,
                });
            }
        }
        Ok(())
    }
}

/// One Pending candidate per category for the given control action.
pub fn generate_uca_candidates(
    cs: &ControlStructure,
    controller: Controller,
    action: &str,
) -> Result<Vec<UcaCandidate>, StpaError> {
    let a = cs.action(controller, action).ok_or_else(|| StpaError::UnknownAction {
        controller,
        action: action.to_string(),
    })?;
    Ok(UcaCategory::ALL
        .into_iter()
        .map(|category| {
            let text = match category {
                UcaCategory::NotProvided => format!("{} not provided when required", a.noun),
                UcaCategory::ProvidedUnsafe => format!("{} while {}", a.done, a.unsafe_context),
                UcaCategory::WrongTimingOrSequence => format!("{} before {}", a.done, a.precondition),
                UcaCategory::WrongDurationOrPersistence => {
                    format!("{} applied too long or stopped too soon", a.noun)
                }
            };
            UcaCandidate {
                controller,
                action: a.name.clone(),
                category,
                text,
                status: CandidateStatus::Pending,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exposure_trigger_candidates() {
        let cs = ControlStructure::canonical();
        let c = generate_uca_candidates(&cs, Controller::Radiographer, "exposureTrigger").unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c[2].category, UcaCategory::WrongTimingOrSequence);
        assert_eq!(c[2].text, "exposure triggered before posture stability confirmed");
        assert!(c.iter().all(|x| x.status == CandidateStatus::Pending));
    }

    #[test]
    fn every_action_yields_four() {
        let cs = ControlStructure::canonical();
        cs.validate().unwrap();
        for a in &cs.control_actions {
            let c = generate_uca_candidates(&cs, a.controller, &a.name).unwrap();
            let cats: std::collections::BTreeSet<_> = c.iter().map(|x| x.category).collect();
            assert_eq!(cats.len(), 4);
        }
        let assent = generate_uca_candidates(&cs, Controller::Patient, "assent").unwrap();
        assert_eq!(assent[0].category, UcaCategory::NotProvided);
    }

    #[test]
    fn unknown_action() {
        let cs = ControlStructure::canonical();
        assert!(generate_uca_candidates(&cs, Controller::Patient, "exposureTrigger").is_err());
    }
}
