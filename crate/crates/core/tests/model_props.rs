use std::collections::{BTreeMap, BTreeSet, VecDeque};

use hazgate_core::data;
use hazgate_core::model::{
    parse_model, serialize_model, validate_model, ActorMode, DiagnosticKind, Edge, GuardDecl, Node,
    NodeKind, ProcessModel,
};
use proptest::prelude::*;

/// Well-formed fan-out everywhere; reachability and dead ends left to chance.
/// Each target index picks from actions, decisions and the final node,
/// with `next` biasing towards the following node in declaration order.
fn random_model(n_actions: usize, n_decisions: usize, picks: &[(bool, usize)]) -> ProcessModel {
    let mut nodes = vec![Node::initial("s")];
    let mut guards = Vec::new();
    for i in 0..n_actions {
        nodes.push(Node::action(&format!("a{i}"), &format!("Act {i}"), ActorMode::A));
    }
    for i in 0..n_decisions {
        nodes.push(Node::decision(&format!("d{i}"), &format!("Check {i}?"), &format!("g{i}")));
        guards.push(GuardDecl {
            name: format!("g{i}"),
            description: format!("guard {i}"),
            true_polarity: format!("g{i} holds"),
        });
    }
    nodes.push(Node::terminal("e"));
    let pool: Vec<String> = nodes[1..].iter().map(|n| n.id.clone()).collect();
    let mut picks = picks.iter().cycle();
    let mut target = |pos: usize| {
        let &(next, k) = picks.next().expect("cycled");
        if next {
            pool[pos.min(pool.len() - 1)].clone()
        } else {
            pool[k % pool.len()].clone()
        }
    };
    let mut edges = vec![Edge::new("s", &target(0), None)];
    for (pos, n) in nodes[1..nodes.len() - 1].iter().enumerate() {
        match n.kind {
            NodeKind::Action => edges.push(Edge::new(&n.id, &target(pos + 1), None)),
            _ => {
                edges.push(Edge::new(&n.id, &target(pos + 1), Some(true)));
                edges.push(Edge::new(&n.id, &target(pos + 1), Some(false)));
            }
        }
    }
    ProcessModel {
        name: "random".into(),
        nodes,
        edges,
        guards,
        initial: "s".into(),
        final_node: "e".into(),
    }
}

fn model_strategy() -> impl Strategy<Value = ProcessModel> {
    (1usize..7, 0usize..5, prop::collection::vec((any::<bool>(), 0usize..64), 1..24))
        .prop_map(|(a, d, picks)| random_model(a, d, &picks))
}

fn bfs(start: &[&str], adj: &BTreeMap<&str, Vec<&str>>) -> BTreeSet<String> {
    let mut seen: BTreeSet<String> = start.iter().map(|s| s.to_string()).collect();
    let mut q: VecDeque<&str> = start.iter().copied().collect();
    while let Some(n) = q.pop_front() {
        for &m in adj.get(n).into_iter().flatten() {
            if seen.insert(m.to_string()) {
                q.push_back(m);
            }
        }
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn reachability_diagnostics_match_bfs(m in model_strategy()) {
        let mut fwd: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        let mut rev: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &m.edges {
            fwd.entry(e.from.as_str()).or_default().push(e.to.as_str());
            rev.entry(e.to.as_str()).or_default().push(e.from.as_str());
        }
        let all: BTreeSet<String> = m.nodes.iter().map(|n| n.id.clone()).collect();
        let reach = bfs(&["s"], &fwd);
        let finals = bfs(&["e"], &rev);
        let want_unreachable: BTreeSet<String> = all.difference(&reach).cloned().collect();
        let want_dead: BTreeSet<String> = all.difference(&finals).cloned().collect();

        let diags = validate_model(&m);
        let of = |k| diags.iter().filter(|d| d.kind == k).filter_map(|d| d.node.clone()).collect::<BTreeSet<_>>();
        prop_assert_eq!(of(DiagnosticKind::UnreachableNode), want_unreachable);
        prop_assert_eq!(of(DiagnosticKind::DeadEnd), want_dead);
    }

    #[test]
    fn valid_models_round_trip(m in model_strategy()) {
        if validate_model(&m).is_empty() {
            let text = serialize_model(&m);
            prop_assert_eq!(parse_model(&text).unwrap(), m);
        } else {
            prop_assert!(parse_model(&serialize_model(&m)).is_err());
        }
    }
}

#[test]
fn canonical_round_trip_and_shape() {
    let m = data::canonical_model();
    assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    assert_eq!(m.count_kind(NodeKind::Action), 8);
    assert_eq!(m.count_kind(NodeKind::Decision), 10);
    assert_eq!(m.guards.len(), 10);
}
