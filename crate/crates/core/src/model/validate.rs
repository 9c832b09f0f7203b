use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use super::{NodeKind, ProcessModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum DiagnosticKind {
    DuplicateNode,
    DanglingEdge,
    InitialCount,
    InitialHasIncoming,
    InitialFanOut,
    NoFinal,
    FinalHasOutgoing,
    DecisionFanOut,
    DecisionEdgeLabels,
    ActionFanOut,
    UndeclaredGuard,
    DuplicateGuard,
    ActorModePresence,
    GuardPresence,
    EdgeGuardValue,
    UnreachableNode,
    DeadEnd,
    HeaderMismatch,
}

impl DiagnosticKind {
    pub fn invariant(self) -> &'static str {
        match self {
            DiagnosticKind::DuplicateNode => "duplicate node id",
            DiagnosticKind::DanglingEdge => "dangling edge",
            DiagnosticKind::InitialCount => "initial node count",
            DiagnosticKind::InitialHasIncoming => "initial node has incoming edge",
            DiagnosticKind::InitialFanOut => "Initial fan-out",
            DiagnosticKind::NoFinal => "no final node",
            DiagnosticKind::FinalHasOutgoing => "final node has outgoing edge",
            DiagnosticKind::DecisionFanOut => "Decision fan-out",
            DiagnosticKind::DecisionEdgeLabels => "decision edge labels",
            DiagnosticKind::ActionFanOut => "Action fan-out",
            DiagnosticKind::UndeclaredGuard => "undeclared guard",
            DiagnosticKind::DuplicateGuard => "duplicate guard",
            DiagnosticKind::ActorModePresence => "actor mode presence",
            DiagnosticKind::GuardPresence => "guard presence",
            DiagnosticKind::EdgeGuardValue => "edge guard value",
            DiagnosticKind::UnreachableNode => "unreachable node",
            DiagnosticKind::DeadEnd => "dead end",
            DiagnosticKind::HeaderMismatch => "initial/final header",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge: Option<(String, String)>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.invariant(), self.message)
    }
}

fn node_diag(kind: DiagnosticKind, node: &str, message: String) -> Diagnostic {
    Diagnostic {
        kind,
        node: Some(node.to_string()),
        edge: None,
        message,
    }
}

/// Check every structural invariant. An empty result means the model is valid.
pub fn validate_model(m: &ProcessModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    for n in &m.nodes {
        if !seen.insert(n.id.as_str()) {
            out.push(node_diag(
                DiagnosticKind::DuplicateNode,
                &n.id,
                format!("node id `{}` declared more than once", n.id),
            ));
        }
    }
    let kinds: BTreeMap<&str, NodeKind> = m.nodes.iter().map(|n| (n.id.as_str(), n.kind)).collect();

    let mut guard_names = BTreeSet::new();
    for g in &m.guards {
        if !guard_names.insert(g.name.as_str()) {
            out.push(Diagnostic {
                kind: DiagnosticKind::DuplicateGuard,
                node: None,
                edge: None,
                message: format!("guard `{}` declared more than once", g.name),
            });
        }
    }

    let mut valid_edges = Vec::new();
    for e in &m.edges {
        let missing: Vec<&str> = [e.from.as_str(), e.to.as_str()]
            .into_iter()
            .filter(|id| !kinds.contains_key(id))
            .collect();
        if !missing.is_empty() {
            out.push(Diagnostic {
                kind: DiagnosticKind::DanglingEdge,
                node: None,
                edge: Some((e.from.clone(), e.to.clone())),
                message: format!(
                    "edge {} -> {} references unknown node(s) {}",
                    e.from,
                    e.to,
                    missing.join(", ")
                ),
            });
            continue;
        }
        let from_decision = kinds[e.from.as_str()] == NodeKind::Decision;
        if from_decision != e.guard_value.is_some() {
            out.push(Diagnostic {
                kind: DiagnosticKind::EdgeGuardValue,
                node: None,
                edge: Some((e.from.clone(), e.to.clone())),
                message: if from_decision {
                    format!("edge {} -> {} leaves a decision without when=", e.from, e.to)
                } else {
                    format!("edge {} -> {} carries when= but its source is not a decision", e.from, e.to)
                },
            });
        }
        valid_edges.push(e);
    }

    let initials: Vec<&str> = m
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Initial)
        .map(|n| n.id.as_str())
        .collect();
    if initials.len() != 1 {
        out.push(Diagnostic {
            kind: DiagnosticKind::InitialCount,
            node: None,
            edge: None,
            message: format!("expected exactly one initial node, found {}", initials.len()),
        });
    }
    if kinds.get(m.initial.as_str()) != Some(&NodeKind::Initial) {
        out.push(node_diag(
            DiagnosticKind::HeaderMismatch,
            &m.initial,
            format!("`{}` is not an initial node", m.initial),
        ));
    }
    if kinds.get(m.final_node.as_str()) != Some(&NodeKind::Final) {
        out.push(node_diag(
            DiagnosticKind::HeaderMismatch,
            &m.final_node,
            format!("`{}` is not a final node", m.final_node),
        ));
    }
    if !m.nodes.iter().any(|n| n.kind == NodeKind::Final) {
        out.push(Diagnostic {
            kind: DiagnosticKind::NoFinal,
            node: None,
            edge: None,
            message: "model declares no final node".into(),
        });
    }

    for n in &m.nodes {
        let outs: Vec<_> = valid_edges.iter().filter(|e| e.from == n.id).collect();
        if n.actor_mode.is_some() != (n.kind == NodeKind::Action) {
            out.push(node_diag(
                DiagnosticKind::ActorModePresence,
                &n.id,
                format!("actor mode must be present exactly on actions (`{}`)", n.id),
            ));
        }
        if n.guard.is_some() != (n.kind == NodeKind::Decision) {
            out.push(node_diag(
                DiagnosticKind::GuardPresence,
                &n.id,
                format!("guard must be present exactly on decisions (`{}`)", n.id),
            ));
        }
        match n.kind {
            NodeKind::Initial => {
                if valid_edges.iter().any(|e| e.to == n.id) {
                    out.push(node_diag(
                        DiagnosticKind::InitialHasIncoming,
                        &n.id,
                        format!("initial node `{}` has incoming edges", n.id),
                    ));
                }
                if outs.len() != 1 {
                    out.push(node_diag(
                        DiagnosticKind::InitialFanOut,
                        &n.id,
                        format!("initial node `{}` has {} outgoing edges, expected 1", n.id, outs.len()),
                    ));
                }
            }
            NodeKind::Final => {
                if !outs.is_empty() {
                    out.push(node_diag(
                        DiagnosticKind::FinalHasOutgoing,
                        &n.id,
                        format!("final node `{}` has outgoing edges", n.id),
                    ));
                }
            }
            NodeKind::Action => {
                if outs.len() != 1 {
                    out.push(node_diag(
                        DiagnosticKind::ActionFanOut,
                        &n.id,
                        format!("action `{}` has {} outgoing edges, expected 1", n.id, outs.len()),
                    ));
                }
            }
            NodeKind::Decision => {
                if let Some(g) = &n.guard {
                    if !guard_names.contains(g.as_str()) {
                        out.push(node_diag(
                            DiagnosticKind::UndeclaredGuard,
                            &n.id,
                            format!("decision `{}` uses undeclared guard `{g}`", n.id),
                        ));
                    }
                }
                if outs.len() != 2 {
                    out.push(node_diag(
                        DiagnosticKind::DecisionFanOut,
                        &n.id,
                        format!("decision `{}` has {} outgoing edges, expected 2", n.id, outs.len()),
                    ));
                } else {
                    let labels: BTreeSet<Option<bool>> = outs.iter().map(|e| e.guard_value).collect();
                    if labels != BTreeSet::from([Some(false), Some(true)]) {
                        out.push(node_diag(
                            DiagnosticKind::DecisionEdgeLabels,
                            &n.id,
                            format!("decision `{}` needs one when=true and one when=false edge", n.id),
                        ));
                    }
                }
            }
        }
    }

    // reachability from the initial node and co-reachability to a final node
    let mut fwd: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut rev: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &valid_edges {
        fwd.entry(e.from.as_str()).or_default().push(e.to.as_str());
        rev.entry(e.to.as_str()).or_default().push(e.from.as_str());
    }
    if kinds.contains_key(m.initial.as_str()) {
        let reached = bfs(&fwd, [m.initial.as_str()]);
        for n in &m.nodes {
            if !reached.contains(n.id.as_str()) {
                out.push(node_diag(
                    DiagnosticKind::UnreachableNode,
                    &n.id,
                    format!("node `{}` is not reachable from `{}`", n.id, m.initial),
                ));
            }
        }
    }
    let finals = m
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Final)
        .map(|n| n.id.as_str());
    let coreached = bfs(&rev, finals);
    if m.nodes.iter().any(|n| n.kind == NodeKind::Final) {
        for n in &m.nodes {
            if !coreached.contains(n.id.as_str()) {
                out.push(node_diag(
                    DiagnosticKind::DeadEnd,
                    &n.id,
                    format!("no final node is reachable from `{}`", n.id),
                ));
            }
        }
    }

    out
}

fn bfs<'a>(
    adj: &BTreeMap<&'a str, Vec<&'a str>>,
    roots: impl IntoIterator<Item = &'a str>,
) -> BTreeSet<&'a str> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    for r in roots {
        if seen.insert(r) {
            queue.push_back(r);
        }
    }
    while let Some(n) = queue.pop_front() {
        for &next in adj.get(n).into_iter().flatten() {
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActorMode, Edge, Node};

    fn minimal() -> ProcessModel {
        ProcessModel {
            name: "m".into(),
            nodes: vec![
                Node::initial("s"),
                Node::action("a", "A", ActorMode::A),
                Node::terminal("e"),
            ],
            edges: vec![Edge::new("s", "a", None), Edge::new("a", "e", None)],
            guards: vec![],
            initial: "s".into(),
            final_node: "e".into(),
        }
    }

    #[test]
    fn minimal_is_clean() {
        assert!(validate_model(&minimal()).is_empty());
    }

    #[test]
    fn action_fan_out_reported() {
        let mut m = minimal();
        m.nodes.push(Node::action("b", "B", ActorMode::M));
        m.edges.push(Edge::new("a", "b", None));
        m.edges.push(Edge::new("b", "e", None));
        let d = validate_model(&m);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::ActionFanOut);
        assert!(d[0].to_string().starts_with("Action fan-out"));
    }

    #[test]
    fn unreachable_and_dead_end() {
        let mut m = minimal();
        m.nodes.push(Node::action("orphan", "O", ActorMode::A));
        m.edges.push(Edge::new("orphan", "e", None));
        let d = validate_model(&m);
        assert!(d
            .iter()
            .any(|d| d.kind == DiagnosticKind::UnreachableNode && d.node.as_deref() == Some("orphan")));

        let mut m = minimal();
        m.nodes.push(Node::action("loop", "L", ActorMode::A));
        m.edges[1] = Edge::new("a", "loop", None);
        m.edges.push(Edge::new("loop", "loop", None));
        let d = validate_model(&m);
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::DeadEnd));
    }

    #[test]
    fn dangling_edge() {
        let mut m = minimal();
        m.edges.push(Edge::new("a", "ghost", None));
        let d = validate_model(&m);
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::DanglingEdge));
    }
}
