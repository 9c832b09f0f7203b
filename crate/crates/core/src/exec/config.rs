use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LedgerAction, Millis, Source, View};
use crate::model::ProcessModel;

/// What an action node does, as far as the executive is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ActionRole {
    Initialise,
    IdentifyStage,
    DeterminePosture,
    PlanTrajectory,
    ArmMotion,
    Adjustment,
    Exposure,
    Release,
    Generic,
}

impl ActionRole {
    /// Nodes where a fault or interruption diverts the workflow.
    pub fn in_positioning_cycle(self) -> bool {
        matches!(
            self,
            ActionRole::PlanTrajectory
                | ActionRole::ArmMotion
                | ActionRole::Adjustment
                | ActionRole::Exposure
        )
    }
}

fn default_roles() -> BTreeMap<String, ActionRole> {
    [
        ("system_initialisation", ActionRole::Initialise),
        ("identify_process_stage", ActionRole::IdentifyStage),
        ("determine_patient_posture", ActionRole::DeterminePosture),
        ("trajectory_planning", ActionRole::PlanTrajectory),
        ("perform_arm_positioning", ActionRole::ArmMotion),
        ("perform_positioning_adjustments", ActionRole::Adjustment),
        ("capture_xray", ActionRole::Exposure),
        ("release_patient", ActionRole::Release),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn default_ledger() -> BTreeMap<LedgerAction, BTreeSet<Source>> {
    LedgerAction::ALL
        .into_iter()
        .map(|a| (a, BTreeSet::from([Source::Radiographer, Source::Patient])))
        .collect()
}

fn default_views() -> Vec<View> {
    View::ALL.to_vec()
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ExecConfig {
    #[serde(default = "one")]
    pub schema_version: u32,
    pub stop_latency_budget_ms: Millis,
    pub stabilization_window_ms: Millis,
    pub staleness_window_ms: Millis,
    pub command_response_budget_ms: Millis,
    pub retake_bound: u32,
    pub step_cap: usize,
    pub required_views: Vec<View>,
    pub ledger: BTreeMap<LedgerAction, BTreeSet<Source>>,
    pub roles: BTreeMap<String, ActionRole>,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            schema_version: 1,
            stop_latency_budget_ms: 100,
            stabilization_window_ms: 2000,
            staleness_window_ms: 10_000,
            command_response_budget_ms: 1000,
            retake_bound: 3,
            step_cap: 10_000,
            required_views: default_views(),
            ledger: default_ledger(),
            roles: default_roles(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported config schema_version {0}")]
    Version(u32),
    #[error("ledger requires no sources for {0:?}")]
    EmptyLedger(LedgerAction),
}

impl ExecConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExecConfig = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.schema_version != 1 {
            return Err(ConfigError::Version(self.schema_version));
        }
        for (a, sources) in &self.ledger {
            if sources.is_empty() {
                return Err(ConfigError::EmptyLedger(*a));
            }
        }
        Ok(())
    }

    pub fn role_of(&self, node: &str) -> ActionRole {
        self.roles.get(node).copied().unwrap_or(ActionRole::Generic)
    }

    /// First action node in `m` that plays `role`.
    pub fn node_for_role<'m>(&self, m: &'m ProcessModel, role: ActionRole) -> Option<&'m str> {
        m.actions()
            .find(|n| self.role_of(&n.id) == role)
            .map(|n| n.id.as_str())
    }

    pub fn required_sources(&self, action: LedgerAction) -> BTreeSet<Source> {
        self.ledger.get(&action).cloned().unwrap_or_default()
    }

    /// Canonical JSON (sorted keys via BTreeMap / declaration order).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form; embedded in reports.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExecConfig::default();
        let back = ExecConfig::from_json(&cfg.canonical_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExecConfig::from_json(r#"{"stabilizationWindowMs": 0}"#).unwrap();
        assert_eq!(cfg.stabilization_window_ms, 0);
        assert_eq!(cfg.stop_latency_budget_ms, 100);
        assert_eq!(cfg.required_sources(LedgerAction::Exposure).len(), 2);
    }

    #[test]
    fn empty_ledger_rejected() {
        assert!(ExecConfig::from_json(r#"{"ledger": {"exposure": []}}"#).is_err());
    }
}
