//! Guarded activity-diagram process models.
//!
//! A [`ProcessModel`] is a small directed graph of action and decision nodes.
//! Decisions branch on a named boolean guard; actions carry an actor annotation
//! saying who is responsible for progressing that stage.

mod dsl;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use dsl::{parse_model, serialize_model, ParseError};
pub use validate::{validate_model, Diagnostic, DiagnosticKind};

pub type NodeId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NodeKind {
    Action,
    Decision,
    Initial,
    Final,
}

/// Control responsibility for an action node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActorMode {
    /// Automated.
    A,
    /// Manual.
    M,
    /// Semi-automated.
    SA,
}

impl ActorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ActorMode::A => "A",
            ActorMode::M => "M",
            ActorMode::SA => "SA",
        }
    }
}

impl fmt::Display for ActorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ActorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(ActorMode::A),
            "M" => Ok(ActorMode::M),
            "SA" => Ok(ActorMode::SA),
            other => Err(format!("unknown actor mode `{other}` (expected A, M or SA)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_mode: Option<ActorMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
}

impl Node {
    pub fn action(id: &str, label: &str, actor: ActorMode) -> Self {
        Node {
            id: id.to_string(),
            kind: NodeKind::Action,
            label: label.to_string(),
            actor_mode: Some(actor),
            guard: None,
        }
    }

    pub fn decision(id: &str, label: &str, guard: &str) -> Self {
        Node {
            id: id.to_string(),
            kind: NodeKind::Decision,
            label: label.to_string(),
            actor_mode: None,
            guard: Some(guard.to_string()),
        }
    }

    pub fn initial(id: &str) -> Self {
        Node {
            id: id.to_string(),
            kind: NodeKind::Initial,
            label: id.to_string(),
            actor_mode: None,
            guard: None,
        }
    }

    pub fn terminal(id: &str) -> Self {
        Node {
            id: id.to_string(),
            kind: NodeKind::Final,
            label: id.to_string(),
            actor_mode: None,
            guard: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard_value: Option<bool>,
}

impl Edge {
    pub fn new(from: &str, to: &str, guard_value: Option<bool>) -> Self {
        Edge {
            from: from.to_string(),
            to: to.to_string(),
            guard_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GuardDecl {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub true_polarity: String,
}

/// The ten guard names used by the canonical imaging workflow.
pub const CANONICAL_GUARDS: [&str; 10] = [
    "systemReady",
    "processStageIdentified",
    "postureDetected",
    "trajectoryValid",
    "faultDetected",
    "interruptionHRI",
    "patientOK",
    "adjustmentsNeeded",
    "retakeNeeded",
    "processDone",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProcessModel {
    pub name: String,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub guards: Vec<GuardDecl>,
    pub initial: NodeId,
    /// The first declared final node. Models may declare several.
    #[serde(rename = "final")]
    pub final_node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("guard polarity supplied for non-decision node `{0}`")]
    PolarityForNonDecision(String),
    #[error("decision node `{0}` requires a guard polarity")]
    MissingPolarity(String),
}

impl ProcessModel {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.from == id)
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn actions(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Action)
    }

    pub fn decisions(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Decision)
    }

    /// Action and decision nodes, in declaration order.
    pub fn process_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Action | NodeKind::Decision))
    }

    /// First decision node branching on `guard`.
    pub fn decision_for_guard(&self, guard: &str) -> Option<&Node> {
        self.decisions().find(|n| n.guard.as_deref() == Some(guard))
    }

    pub fn guard_decl(&self, name: &str) -> Option<&GuardDecl> {
        self.guards.iter().find(|g| g.name == name)
    }

    pub fn final_nodes(&self) -> BTreeSet<&str> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Final)
            .map(|n| n.id.as_str())
            .collect()
    }

    /// Adjacency list keyed by node id, successors in edge declaration order.
    pub fn adjacency(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut adj: BTreeMap<&str, Vec<&str>> =
            self.nodes.iter().map(|n| (n.id.as_str(), Vec::new())).collect();
        for e in &self.edges {
            adj.entry(e.from.as_str()).or_default().push(e.to.as_str());
        }
        adj
    }

    /// Successors of `id`. Decisions must be given the guard polarity and
    /// return the single node on that branch.
    pub fn node_successors(
        &self,
        id: &str,
        guard_value: Option<bool>,
    ) -> Result<Vec<NodeId>, ModelError> {
        let node = self
            .node(id)
            .ok_or_else(|| ModelError::UnknownNode(id.to_string()))?;
        match (node.kind, guard_value) {
            (NodeKind::Decision, None) => Err(ModelError::MissingPolarity(id.to_string())),
            (NodeKind::Decision, Some(v)) => Ok(self
                .outgoing(id)
                .filter(|e| e.guard_value == Some(v))
                .map(|e| e.to.clone())
                .take(1)
                .collect()),
            (_, Some(_)) => Err(ModelError::PolarityForNonDecision(id.to_string())),
            (_, None) => Ok(self.outgoing(id).map(|e| e.to.clone()).collect()),
        }
    }
}

/// Lowercased alphanumerics only; used to match display labels across sources.
pub fn normalize_label(label: &str) -> String {
    label
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_normalization_ignores_case_and_punctuation() {
        assert_eq!(normalize_label("\"Release\" patient"), "releasepatient");
        assert_eq!(normalize_label("``Release'' Patient"), "releasepatient");
        assert_eq!(normalize_label("Process Done?"), normalize_label("Process done?"));
    }

    #[test]
    fn actor_mode_parses() {
        assert_eq!("SA".parse::<ActorMode>().unwrap(), ActorMode::SA);
        assert!("X".parse::<ActorMode>().is_err());
    }
}
