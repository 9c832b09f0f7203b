use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ConfirmationLedger, Millis, SessionLog, View};
use crate::model::NodeId;

/// Outstanding revalidation components after a disruption.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Revalidation {
    pub posture: bool,
    pub trajectory: bool,
    pub readiness: bool,
}

impl Revalidation {
    pub fn all() -> Self {
        Revalidation {
            posture: true,
            trajectory: true,
            readiness: true,
        }
    }

    pub fn any(self) -> bool {
        self.posture || self.trajectory || self.readiness
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecState {
    pub current_node: NodeId,
    pub clock: Millis,
    pub stabilization_window_ms: Millis,
    pub staleness_window_ms: Millis,

    pub system_ready: bool,
    pub posture_valid: bool,
    pub arm_moving: bool,
    pub exposure_locked: bool,
    pub interruption_active: bool,
    pub fault_active: bool,
    pub revalidation_required: bool,
    pub compliance_mode: bool,

    pub posture_stable_since: Option<Millis>,
    pub views_acquired: BTreeSet<View>,
    pub retake_count: BTreeMap<View, u32>,
    pub ledger: ConfirmationLedger,
    pub log: SessionLog,

    pub current_view: Option<View>,
    pub stage_identified: bool,
    pub trajectory_valid: bool,
    pub adjustments_requested: bool,
    pub retake_pending: bool,
    /// Forces `interruptionHRI` true once after a stop or movement in the
    /// positioning cycle, routing the workflow back to posture detection.
    pub interruption_latch: bool,
    /// The next arrival at the release node takes the safe path automatically.
    pub safe_release_pending: bool,
    pub last_assent: Option<Millis>,
    pub pending: Revalidation,
    pub abandoned: bool,
    pub stopped_at: Option<Millis>,
    pub finished: bool,
    pub custom_guards: BTreeMap<String, bool>,
}

impl ExecState {
    pub(crate) fn fresh(node: NodeId, stabilization: Millis, staleness: Millis) -> Self {
        ExecState {
            current_node: node,
            clock: 0,
            stabilization_window_ms: stabilization,
            staleness_window_ms: staleness,
            system_ready: false,
            posture_valid: false,
            arm_moving: false,
            exposure_locked: true,
            interruption_active: false,
            fault_active: false,
            revalidation_required: false,
            compliance_mode: false,
            posture_stable_since: None,
            views_acquired: BTreeSet::new(),
            retake_count: BTreeMap::new(),
            ledger: ConfirmationLedger::default(),
            log: SessionLog::default(),
            current_view: None,
            stage_identified: false,
            trajectory_valid: false,
            adjustments_requested: false,
            retake_pending: false,
            interruption_latch: false,
            safe_release_pending: false,
            last_assent: None,
            pending: Revalidation::default(),
            abandoned: false,
            stopped_at: None,
            finished: false,
            custom_guards: BTreeMap::new(),
        }
    }

    /// An exposure has been triggered and not yet completed or aborted.
    pub fn exposure_active(&self) -> bool {
        !self.exposure_locked
    }

    pub fn patient_assent_fresh(&self) -> bool {
        self.last_assent
            .is_some_and(|t| t <= self.clock && self.clock - t <= self.staleness_window_ms)
    }
}
