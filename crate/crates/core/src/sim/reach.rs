use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::run_timeline;
use super::timeline::nominal_timeline;
use crate::exec::{
    Command, ConfirmationLedger, EmittedAction, Event, EventKind, ExecConfig, ExecError, ExecState,
    Executive, LedgerAction, Millis, SessionLog, Source,
};
use crate::model::ProcessModel;

/// Time step for ordinary events. Only `Tick` advances the clock, by one
/// stabilisation window, so every timestamp age is a multiple of the window.
pub const EVENT_STEP_MS: Millis = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Symbol {
    MotionStart,
    MotionComplete,
    Assent,
    ExposureConfirm,
    ExposureRequest,
    PostureValid,
    Tick,
    Movement,
}

impl Symbol {
    pub const ALL: [Symbol; 8] = [
        Symbol::MotionStart,
        Symbol::MotionComplete,
        Symbol::Assent,
        Symbol::ExposureConfirm,
        Symbol::ExposureRequest,
        Symbol::PostureValid,
        Symbol::Tick,
        Symbol::Movement,
    ];

    /// Concrete event for this symbol at `t`, none for `Tick`.
    pub fn event(self, t: Millis) -> Option<Event> {
        Some(match self {
            Symbol::MotionStart => Event::command(t, Source::Radiographer, Command::MotionStart),
            Symbol::MotionComplete => Event::new(t, Source::Sensor, EventKind::MotionComplete),
            Symbol::Assent => Event::new(t, Source::Patient, EventKind::Assent),
            Symbol::ExposureConfirm => Event::command(t, Source::Radiographer, Command::Exposure),
            Symbol::ExposureRequest => Event::new(t, Source::Radiographer, EventKind::ExposureRequest),
            Symbol::PostureValid => Event::new(t, Source::Sensor, EventKind::PostureUpdate).with_valid(true),
            Symbol::Movement => Event::new(t, Source::Sensor, EventKind::MovementDetected),
            Symbol::Tick => return None,
        })
    }

    fn step(self, cfg: &ExecConfig) -> Millis {
        if self == Symbol::Tick {
            cfg.stabilization_window_ms
        } else {
            EVENT_STEP_MS
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReachBounds {
    pub max_steps: usize,
    pub event_alphabet: Vec<Symbol>,
    pub max_states: usize,
}

impl Default for ReachBounds {
    fn default() -> Self {
        ReachBounds {
            max_steps: 12,
            event_alphabet: Symbol::ALL.to_vec(),
            max_states: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counterexample {
    pub symbols: Vec<Symbol>,
    /// Full timeline: the nominal prefix followed by the symbol events.
    pub events: Vec<Event>,
    pub failed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Disagreement {
    pub symbols: Vec<Symbol>,
    pub oracle_unsafe: bool,
    pub simulator_violated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReachabilityResult {
    pub executive_enabled: bool,
    pub bounds: ReachBounds,
    pub explored_states: usize,
    pub depth_reached: usize,
    /// False when the state budget ran out before the depth bound.
    pub complete: bool,
    pub unsafe_states: usize,
    pub counterexample: Option<Counterexample>,
    pub cross_checked: usize,
    pub disagreements: Vec<Disagreement>,
}

impl ReachabilityResult {
    pub fn unsafe_reachable(&self) -> bool {
        self.unsafe_states > 0
    }
}

/// Events leading up to the first arm positioning step of the nominal session.
pub fn reach_prefix() -> Vec<Event> {
    nominal_timeline()
        .into_iter()
        .take_while(|e| e.payload.command != Some(Command::MotionStart))
        .collect()
}

/// Exposure predicate written out from the interlock definition, checked
/// against the state just before the request.
fn exposure_failures(s: &ExecState, t: Millis) -> Vec<String> {
    let fresh = |src| {
        s.ledger
            .received_at(LedgerAction::Exposure, src)
            .is_some_and(|at| at <= t && t - at <= s.staleness_window_ms)
    };
    let checks = [
        ("postureValid", s.posture_valid),
        (
            "stabilization",
            s.posture_stable_since
                .is_some_and(|since| t >= since && t - since >= s.stabilization_window_ms),
        ),
        ("armImmobility", !s.arm_moving),
        ("patientAssent", fresh(Source::Patient)),
        ("radiographerConfirmation", fresh(Source::Radiographer)),
        ("noFault", !s.fault_active),
        ("noInterruption", !s.interruption_active),
        ("revalidated", !s.revalidation_required),
    ];
    checks
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| n.to_string())
        .collect()
}

/// State with the log dropped and every timestamp replaced by its age,
/// capped just past the longest window. Two states with the same key
/// behave identically under every continuation.
fn abstract_key(s: &ExecState, cap: Millis) -> ExecState {
    const BASE: Millis = 1 << 40;
    let rel = |t: Millis| BASE - s.clock.saturating_sub(t).min(cap);
    let mut k = s.clone();
    k.log = SessionLog::default();
    k.clock = BASE;
    k.posture_stable_since = s.posture_stable_since.map(rel);
    k.last_assent = s.last_assent.map(rel);
    k.stopped_at = s.stopped_at.map(rel);
    let mut ledger = ConfirmationLedger::default();
    for (a, src, t) in s.ledger.entries() {
        ledger.record(a, src, rel(t));
    }
    k.ledger = ledger;
    k
}

struct Node {
    state: ExecState,
    parent: Option<usize>,
    symbol: Option<Symbol>,
    depth: usize,
    unsafe_failed: Option<Vec<String>>,
}

fn path(nodes: &[Node], mut i: usize) -> Vec<Symbol> {
    let mut out = Vec::new();
    while let Some(sym) = nodes[i].symbol {
        out.push(sym);
        i = nodes[i].parent.expect("non-root has a parent");
    }
    out.reverse();
    out
}

/// Symbol sequence turned into a concrete timeline after the prefix.
pub fn symbols_to_events(cfg: &ExecConfig, start: Millis, symbols: &[Symbol]) -> Vec<Event> {
    let mut t = start;
    let mut out = Vec::new();
    for s in symbols {
        t += s.step(cfg);
        out.extend(s.event(t));
    }
    out
}

/// Exhaustive breadth-first enumeration of symbol sequences from the
/// arm-positioning state of the nominal session. A state is unsafe when the
/// step into it emitted `TriggerExposure` with the exposure predicate false.
/// Unsafe states are not expanded further. Every enumerated transition,
/// including ones that land on an already seen state, is replayed from
/// scratch through the full simulator and its R24 verdict compared with the
/// oracle's classification.
pub fn brute_force_reachability(
    m: &ProcessModel,
    cfg: &ExecConfig,
    bounds: &ReachBounds,
    executive_enabled: bool,
) -> Result<ReachabilityResult, ExecError> {
    let x = Executive::new(m, cfg, executive_enabled);
    let prefix = reach_prefix();
    let mut root = x.init()?;
    for e in &prefix {
        x.handle_event(&mut root, e)?;
    }
    let start = root.clock;
    let cap = cfg.staleness_window_ms.max(cfg.stabilization_window_ms) + 1;
    let root = abstract_key(&root, cap);

    let mut seen: HashSet<ExecState> = HashSet::new();
    seen.insert(root.clone());
    let mut nodes = vec![Node {
        state: root,
        parent: None,
        symbol: None,
        depth: 0,
        unsafe_failed: None,
    }];
    let mut frontier = vec![0usize];
    // every enumerated transition, duplicates included: (parent, symbol, unsafe)
    let mut edges: Vec<(usize, Symbol, bool)> = Vec::new();
    let mut complete = true;
    let mut depth_reached = 0;

    for depth in 1..=bounds.max_steps {
        if frontier.is_empty() {
            break;
        }
        let expanded: Vec<Vec<(usize, Symbol, ExecState, Option<Vec<String>>)>> = frontier
            .par_iter()
            .map(|&i| {
                let s = &nodes[i].state;
                bounds
                    .event_alphabet
                    .iter()
                    .map(|&sym| {
                        let t = s.clock + sym.step(cfg);
                        let mut next = s.clone();
                        let mut failed = None;
                        match sym.event(t) {
                            Some(e) => {
                                let pre = s.clone();
                                let r = x.handle_event(&mut next, &e)?;
                                if r.actions.contains(&EmittedAction::TriggerExposure) {
                                    let f = exposure_failures(&pre, t);
                                    if !f.is_empty() {
                                        failed = Some(f);
                                    }
                                }
                            }
                            None => next.clock = t,
                        }
                        Ok((i, sym, next, failed))
                    })
                    .collect::<Result<Vec<_>, ExecError>>()
            })
            .collect::<Result<_, _>>()?;

        let mut next_frontier = Vec::new();
        'merge: for batch in expanded {
            for (parent, sym, state, failed) in batch {
                edges.push((parent, sym, failed.is_some()));
                let state = abstract_key(&state, cap);
                if seen.contains(&state) {
                    continue;
                }
                seen.insert(state.clone());
                if nodes.len() >= bounds.max_states {
                    complete = false;
                    break 'merge;
                }
                let is_unsafe = failed.is_some();
                nodes.push(Node {
                    state,
                    parent: Some(parent),
                    symbol: Some(sym),
                    depth,
                    unsafe_failed: failed,
                });
                if !is_unsafe {
                    next_frontier.push(nodes.len() - 1);
                }
            }
        }
        depth_reached = depth;
        frontier = next_frontier;
        if !complete {
            break;
        }
    }

    let unsafe_idx: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].unsafe_failed.is_some()).collect();
    let counterexample = unsafe_idx.first().map(|&i| {
        let symbols = path(&nodes, i);
        let mut events = prefix.clone();
        events.extend(symbols_to_events(cfg, start, &symbols));
        Counterexample {
            symbols,
            events,
            failed: nodes[i].unsafe_failed.clone().unwrap_or_default(),
        }
    });

    let mut sequences: Vec<(Vec<Symbol>, bool)> = vec![(Vec::new(), false)];
    sequences.extend(edges.iter().map(|&(parent, sym, unsafe_step)| {
        let mut symbols = path(&nodes, parent);
        symbols.push(sym);
        (symbols, unsafe_step)
    }));
    let disagreements: Vec<Disagreement> = sequences
        .par_iter()
        .filter_map(|(symbols, oracle_unsafe)| {
            let mut events = prefix.clone();
            events.extend(symbols_to_events(cfg, start, symbols));
            let simulator_violated = run_timeline(m, cfg, &events, executive_enabled)
                .map(|run| run.violated("R24"))
                .unwrap_or(false);
            (simulator_violated != *oracle_unsafe).then(|| Disagreement {
                symbols: symbols.clone(),
                oracle_unsafe: *oracle_unsafe,
                simulator_violated,
            })
        })
        .collect();

    Ok(ReachabilityResult {
        executive_enabled,
        bounds: bounds.clone(),
        explored_states: nodes.len(),
        depth_reached: nodes.iter().map(|n| n.depth).max().unwrap_or(0).min(depth_reached),
        complete,
        unsafe_states: unsafe_idx.len(),
        counterexample,
        cross_checked: sequences.len(),
        disagreements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;

    fn bounds(depth: usize) -> ReachBounds {
        ReachBounds {
            max_steps: depth,
            ..ReachBounds::default()
        }
    }

    #[test]
    fn depth_zero_is_just_the_root() {
        let (m, cfg) = (data::canonical_model(), data::canonical_config());
        let r = brute_force_reachability(&m, &cfg, &bounds(0), false).unwrap();
        assert_eq!(r.explored_states, 1);
        assert!(!r.unsafe_reachable());
        assert!(r.disagreements.is_empty());
    }

    #[test]
    fn shallow_search_separates_on_and_off() {
        let (m, cfg) = (data::canonical_model(), data::canonical_config());
        let on = brute_force_reachability(&m, &cfg, &bounds(5), true).unwrap();
        assert!(!on.unsafe_reachable());
        assert!(on.disagreements.is_empty(), "{:?}", &on.disagreements[..on.disagreements.len().min(3)]);
        let off = brute_force_reachability(&m, &cfg, &bounds(5), false).unwrap();
        assert!(off.unsafe_reachable());
        assert!(off.disagreements.is_empty(), "{:?}", &off.disagreements[..off.disagreements.len().min(3)]);
        let cx = off.counterexample.unwrap();
        let run = run_timeline(&m, &cfg, &cx.events, false).unwrap();
        assert!(run.violated("R24"));
    }
}
