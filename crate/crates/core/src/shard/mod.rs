//! SHARD guideword analysis over process models.

mod catalog;
mod worksheet;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{Node, NodeKind, ProcessModel};

pub use catalog::{
    load_shard_catalog, parse_shard_catalog, shard_catalog_json, CatalogError, DeviationRecord,
};
pub use worksheet::{
    coverage_report, generate_worksheet, severity_histogram, CoverageReport, SeverityHistogram,
    SlotStatus, WorksheetSlot,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Guideword {
    Omission,
    Commission,
    Early,
    Late,
    Value,
}

impl Guideword {
    pub const ALL: [Guideword; 5] = [
        Guideword::Omission,
        Guideword::Commission,
        Guideword::Early,
        Guideword::Late,
        Guideword::Value,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Guideword::Omission => "Omission",
            Guideword::Commission => "Commission",
            Guideword::Early => "Early",
            Guideword::Late => "Late",
            Guideword::Value => "Value",
        }
    }

    /// Definition adapted to robotic services.
    pub fn adapted_definition(self) -> &'static str {
        match self {
            Guideword::Omission => "The robotic service is not performed when required (e.g., the robot fails to detect a user request or does not deliver assistance).",
            Guideword::Commission => "A robotic service is performed without a valid trigger (e.g., the robot initiates movement or communication without user command or environmental justification).",
            Guideword::Early => "The robotic service occurs earlier than intended, such as the robot responding before a task condition is met or interrupting the user prematurely. This may be absolute or relative.",
            Guideword::Late => "The robotic service occurs later than intended (e.g., delayed response to a help request or late delivery of support that affects task performance).",
            Guideword::Value => "The information (data) or physical output delivered has the wrong value (e.g., misinterpreted sensor data, incorrect movement parameters or excessive force).",
        }
    }

    pub fn original_definition(self) -> &'static str {
        match self {
            Guideword::Omission => "The service is never delivered, i.e., there is no communication.",
            Guideword::Commission => "A service is delivered when not required, i.e., there is an unexpected communication.",
            Guideword::Early => "The service (communication) occurs earlier than intended.",
            Guideword::Late => "The service (communication) occurs later than intended.",
            Guideword::Value => "The information (data) delivered has the wrong value.",
        }
    }
}

impl fmt::Display for Guideword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Guideword {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Guideword::ALL
            .into_iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown guideword `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Override {
    pub node: String,
    pub guidewords: BTreeSet<Guideword>,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindDefaults {
    pub action: BTreeSet<Guideword>,
    pub decision: BTreeSet<Guideword>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApplicabilityRule {
    #[serde(default = "one")]
    pub schema_version: u32,
    pub defaults: KindDefaults,
    #[serde(default)]
    pub overrides: Vec<Override>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("rules JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading rules: {0}")]
    Io(#[from] std::io::Error),
    #[error("override for `{0}` has no justification")]
    MissingJustification(String),
    #[error("override for `{0}` appears twice")]
    DuplicateOverride(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

impl Default for ApplicabilityRule {
    fn default() -> Self {
        ApplicabilityRule {
            schema_version: 1,
            defaults: KindDefaults {
                action: Guideword::ALL.into_iter().collect(),
                decision: BTreeSet::from([Guideword::Omission, Guideword::Commission, Guideword::Value]),
            },
            overrides: Vec::new(),
        }
    }
}

impl ApplicabilityRule {
    pub fn from_json(text: &str) -> Result<Self, RuleError> {
        let rules: ApplicabilityRule = serde_json::from_str(text)?;
        let mut seen = BTreeSet::new();
        for o in &rules.overrides {
            if o.justification.trim().is_empty() {
                return Err(RuleError::MissingJustification(o.node.clone()));
            }
            if !seen.insert(o.node.as_str()) {
                return Err(RuleError::DuplicateOverride(o.node.clone()));
            }
        }
        Ok(rules)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, RuleError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn override_for(&self, node_id: &str) -> Option<&Override> {
        self.overrides.iter().find(|o| o.node == node_id)
    }

    pub fn overrides_by_node(&self) -> BTreeMap<&str, &Override> {
        self.overrides.iter().map(|o| (o.node.as_str(), o)).collect()
    }
}

/// Guidewords to apply at `node`: its override if any, else the kind default.
/// Initial and final pseudo-nodes get none.
pub fn applicable_guidewords(node: &Node, rules: &ApplicabilityRule) -> BTreeSet<Guideword> {
    if let Some(o) = rules.override_for(&node.id) {
        return o.guidewords.clone();
    }
    match node.kind {
        NodeKind::Action => rules.defaults.action.clone(),
        NodeKind::Decision => rules.defaults.decision.clone(),
        NodeKind::Initial | NodeKind::Final => BTreeSet::new(),
    }
}

/// Same as [`applicable_guidewords`] but looks the node up by id.
pub fn applicable_guidewords_for(
    m: &ProcessModel,
    node_id: &str,
    rules: &ApplicabilityRule,
) -> Result<BTreeSet<Guideword>, RuleError> {
    m.node(node_id)
        .map(|n| applicable_guidewords(n, rules))
        .ok_or_else(|| RuleError::UnknownNode(node_id.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;

    #[test]
    fn five_guidewords_in_fixed_order() {
        assert_eq!(Guideword::ALL.len(), 5);
        let mut sorted = Guideword::ALL;
        sorted.sort();
        assert_eq!(sorted, Guideword::ALL);
        assert!(Guideword::Omission
            .adapted_definition()
            .starts_with("The robotic service is not performed when required"));
    }

    #[test]
    fn canonical_overrides() {
        let m = data::canonical_model();
        let rules = data::canonical_rules();
        let tv = applicable_guidewords_for(&m, "trajectory_valid", &rules).unwrap();
        assert_eq!(
            tv,
            BTreeSet::from([Guideword::Omission, Guideword::Commission, Guideword::Value])
        );
        assert_eq!(applicable_guidewords_for(&m, "capture_xray", &rules).unwrap().len(), 5);
        assert_eq!(applicable_guidewords_for(&m, "fault_detected", &rules).unwrap().len(), 5);
        assert!(applicable_guidewords_for(&m, "nope", &rules).is_err());
    }

    #[test]
    fn justification_required() {
        let text = r#"{"defaults":{"action":["Omission"],"decision":["Omission"]},"overrides":[{"node":"x","guidewords":["Late"],"justification":" "}]}"#;
        assert!(matches!(
            ApplicabilityRule::from_json(text),
            Err(RuleError::MissingJustification(_))
        ));
    }
}
