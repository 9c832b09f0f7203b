//! The acceptance gate: ten checks, each with a wall-clock budget.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{self, DataSet};
use crate::exec::{
    gate_exposure, Event, ExecState, Executive, LedgerAction, LogKind, Methodology, Source,
};
use crate::model::{validate_model, NodeKind};
use crate::shard::{coverage_report, generate_worksheet, Guideword};
use crate::sim::{
    brute_force_reachability, order_events, random_timeline, run_random_campaign, run_scenario,
    run_timeline, stop_sweep, CampaignCatalogs, ExpectedOutcome, Outcome, ReachBounds, Variation,
};
use crate::HazardLevel;

pub const CAMPAIGN_SCENARIOS: usize = 10_000;
pub const CAMPAIGN_SEED: u64 = 42;
pub const REACH_DEPTH: usize = 12;
pub const LOG_TIMELINES: u64 = 1000;

const GUARDS: [&str; 10] = [
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

const SLOTS: usize = 77;

/// Methodology column per requirement: S = SHARD, T = STPA, B = both.
const METHODOLOGY: &str = "SSBBSBSSSTBTSSSBSTTSSTBBSTT";

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {:>2} {} ({:.2}s of {}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            self.detail
        )
    }
}

type Check = fn(&DataSet) -> Result<String, String>;

const CRITERIA: [(u8, &str, u64, Check); 10] = [
    (1, "model fidelity", 1, model_fidelity),
    (2, "SHARD catalog fidelity", 1, shard_fidelity),
    (3, "STPA catalog fidelity", 1, stpa_fidelity),
    (4, "requirement registry fidelity", 1, registry_fidelity),
    (5, "exposure interlock truth table", 1, exposure_truth_table),
    (6, "stop safety sweep", 5, stop_safety),
    (7, "campaign soundness", 60, campaign_soundness),
    (8, "hazard realism", 5, hazard_realism),
    (9, "oracle equivalence", 120, oracle_equivalence),
    (10, "log completeness", 10, log_completeness),
];

pub fn criterion_ids() -> impl Iterator<Item = u8> {
    CRITERIA.iter().map(|c| c.0)
}

/// Run one criterion, `None` for an unknown id.
pub fn run_criterion(id: u8, d: &DataSet) -> Option<CriterionResult> {
    let &(id, name, budget, check) = CRITERIA.iter().find(|c| c.0 == id)?;
    let budget = Duration::from_secs(budget);
    let start = Instant::now();
    let outcome = check(d);
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if elapsed > budget {
        passed = false;
        detail = format!("over budget; {detail}");
    }
    Some(CriterionResult {
        id,
        name,
        passed,
        detail,
        elapsed,
        budget,
    })
}

pub fn run_all(d: &DataSet) -> Vec<CriterionResult> {
    criterion_ids().filter_map(|id| run_criterion(id, d)).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn model_fidelity(d: &DataSet) -> Result<String, String> {
    let m = &d.model;
    let diags = validate_model(m);
    ensure(diags.is_empty(), || format!("{} diagnostics, first {:?}", diags.len(), diags[0]))?;
    let actions = m.nodes.iter().filter(|n| n.kind == NodeKind::Action).count();
    let decisions: Vec<_> = m.nodes.iter().filter(|n| n.kind == NodeKind::Decision).collect();
    ensure(actions == 8, || format!("{actions} action nodes"))?;
    ensure(decisions.len() == 10, || format!("{} decision nodes", decisions.len()))?;
    let guards: BTreeSet<&str> = decisions.iter().filter_map(|n| n.guard.as_deref()).collect();
    let expected: BTreeSet<&str> = GUARDS.into_iter().collect();
    ensure(guards == expected, || format!("guards {guards:?}"))?;
    Ok(format!("valid, {actions} actions, {} decisions, guards match", decisions.len()))
}

fn shard_fidelity(d: &DataSet) -> Result<String, String> {
    let slots = generate_worksheet(&d.model, &d.rules);
    ensure(slots.len() == SLOTS, || format!("{} worksheet slots", slots.len()))?;
    ensure(d.shard.len() == slots.len(), || format!("{} catalog rows for {} slots", d.shard.len(), slots.len()))?;
    let cov = coverage_report(&slots, &d.shard);
    ensure(cov.drift.is_empty(), || format!("drift {:?}", cov.drift))?;
    ensure(cov.pending.is_empty() && cov.fill_ratio == 1.0, || format!("pending {:?}", cov.pending))?;
    let defs: BTreeSet<&str> = Guideword::ALL.iter().map(|g| g.adapted_definition()).collect();
    ensure(defs.len() == 5, || "adapted definitions not distinct".into())?;
    for g in Guideword::ALL {
        let adapted = g.adapted_definition();
        ensure(adapted != g.original_definition() && adapted.len() > g.original_definition().len(), || {
            format!("{g} definition is not the robotic adaptation")
        })?;
    }
    Ok(format!("{} rows = {} slots, no drift, 100% filled, 5 guidewords", d.shard.len(), slots.len()))
}

fn stpa_fidelity(d: &DataSet) -> Result<String, String> {
    let uca_ids: Vec<String> = d.ucas.iter().map(|u| u.id.clone()).collect();
    let expected: Vec<String> = (1..=35).map(|i| format!("UCA{i:02}")).collect();
    ensure(uca_ids == expected, || format!("{} UCA records, ids {:?}..", uca_ids.len(), uca_ids.first()))?;
    let cue_ids: Vec<String> = d.cues.iter().map(|c| c.id.clone()).collect();
    let expected: Vec<String> = (1..=7).map(|i| format!("CUE{i:02}")).collect();
    ensure(cue_ids == expected, || format!("{} CUE records", cue_ids.len()))?;
    // re-read the raw level and role columns rather than trusting the parsed enums
    let levels: BTreeSet<&str> = HazardLevel::ALL.iter().map(|l| l.as_str()).collect();
    for (text, level_col, role_col) in [(data::UCA_CSV, 8, Some(2)), (data::CUE_CSV, 6, None)] {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        for row in rdr.records() {
            let row = row.map_err(|e| e.to_string())?;
            let level = row.get(level_col).unwrap_or("");
            ensure(levels.contains(level), || format!("level `{level}` in {:?}", row.get(0)))?;
            if let Some(c) = role_col {
                let role = row.get(c).unwrap_or("");
                ensure(role == "R" || role == "P", || format!("role `{role}` in {:?}", row.get(0)))?;
            }
        }
    }
    Ok(format!("{} UCAs, {} CUEs, levels and roles in range", d.ucas.len(), d.cues.len()))
}

fn registry_fidelity(d: &DataSet) -> Result<String, String> {
    let ids: Vec<&str> = d.requirements.iter().map(|r| r.id.as_str()).collect();
    let expected: Vec<String> = (1..=27).map(|i| format!("R{i}")).collect();
    ensure(ids == expected, || format!("registry ids {ids:?}"))?;
    for (r, tag) in d.requirements.iter().zip(METHODOLOGY.chars()) {
        let want: BTreeSet<Methodology> = match tag {
            'S' => [Methodology::Shard].into(),
            'T' => [Methodology::Stpa].into(),
            _ => [Methodology::Shard, Methodology::Stpa].into(),
        };
        ensure(r.methodology == want, || format!("{} tagged {:?}", r.id, r.methodology))?;
    }
    let section = crate::report::StpaSection::build(&d.ucas, &d.cues, &d.shard, &d.requirements, &d.links);
    let mismatches = section.matrix.methodology_mismatches();
    ensure(mismatches == 0, || format!("{mismatches} methodology mismatches"))?;
    Ok("R1-R27 present, tags match, 0 methodology mismatches".into())
}

fn exposure_truth_table(d: &DataSet) -> Result<String, String> {
    let cfg = &d.config;
    let mut granted = Vec::new();
    for bits in 0u32..256 {
        let on = |i: u32| bits & (1 << i) != 0;
        let mut s = ExecState::fresh("n".into(), cfg.stabilization_window_ms, cfg.staleness_window_ms);
        s.clock = 100_000;
        s.posture_valid = on(0);
        s.posture_stable_since = on(1).then_some(s.clock - cfg.stabilization_window_ms);
        s.arm_moving = !on(2);
        if on(3) {
            s.ledger.record(LedgerAction::Exposure, Source::Patient, s.clock);
        }
        if on(4) {
            s.ledger.record(LedgerAction::Exposure, Source::Radiographer, s.clock);
        }
        s.fault_active = !on(5);
        s.interruption_active = !on(6);
        s.revalidation_required = !on(7);
        let decision = gate_exposure(&s);
        let oracle = bits == 0xff;
        ensure(decision.allowed == oracle, || format!("row {bits:08b}: gate {} oracle {oracle}", decision.allowed))?;
        ensure(decision.failed_conditions.len() == 8 - bits.count_ones() as usize, || {
            format!("row {bits:08b}: failed {:?}", decision.failed_conditions)
        })?;
        if decision.allowed {
            granted.push(bits);
        }
    }
    ensure(granted.len() == 1, || format!("{} granting rows", granted.len()))?;
    Ok("256 rows, exactly one grants (all conjuncts hold)".into())
}

fn stop_safety(d: &DataSet) -> Result<String, String> {
    let r = stop_sweep(&d.model, &d.config, true).map_err(|e| e.to_string())?;
    ensure(r.rows.len() == 18, || format!("{} nodes swept", r.rows.len()))?;
    let bad: Vec<String> = r
        .rows
        .iter()
        .filter(|row| !row.violations.is_empty())
        .map(|row| format!("{}: {}", row.node, row.violations.join("; ")))
        .collect();
    ensure(bad.is_empty(), || bad.join(" | "))?;
    let worst = r.rows.iter().filter_map(|row| row.stop_latency_ms).max().unwrap_or(0);
    Ok(format!("18 nodes, worst stop latency {worst} ms of {} ms, 0 violations", r.budget_ms))
}

fn campaign_soundness(d: &DataSet) -> Result<String, String> {
    let cats = CampaignCatalogs {
        shard: &d.shard,
        ucas: &d.ucas,
        cues: &d.cues,
    };
    let a = run_random_campaign(&d.model, &d.config, cats, CAMPAIGN_SCENARIOS, CAMPAIGN_SEED, true);
    let b = run_random_campaign(&d.model, &d.config, cats, CAMPAIGN_SCENARIOS, CAMPAIGN_SEED, true);
    let hard = a.hard_violations();
    ensure(hard == 0, || {
        let first = a.violation_samples.first().map(|v| format!("{v:?}")).unwrap_or_default();
        format!("{hard} hard violations, first {first}")
    })?;
    ensure(a.to_json() == b.to_json(), || "re-run report differs".into())?;
    Ok(format!(
        "{} scenarios, {} injections, 0 hard violations, re-run byte-identical",
        a.scenarios, a.injections_applied
    ))
}

fn hazard_realism(d: &DataSet) -> Result<String, String> {
    let mut mapped = Vec::new();
    for name in data::HAZARD_SCENARIOS {
        let sc = data::scenario(name)
            .ok_or_else(|| format!("scenario {name} missing"))?
            .map_err(|e| e.to_string())?;
        let Some(ExpectedOutcome::ViolationExpected(req)) = sc.expectation(false) else {
            return Err(format!("{name} states no violation with the executive off"));
        };
        let off = run_scenario(&d.model, &d.config, &sc, false).map_err(|e| e.to_string())?;
        let verdict = off.run.verdict(req).ok_or_else(|| format!("{name}: no {req} verdict"))?;
        ensure(off.run.violated(req) && verdict.witness.is_some(), || {
            format!("{name}: {req} not violated with a witness when off")
        })?;
        let on = run_scenario(&d.model, &d.config, &sc, true).map_err(|e| e.to_string())?;
        ensure(on.run.outcome == Outcome::BlockedSafely, || {
            format!("{name}: {:?} when on", on.run.outcome)
        })?;
        mapped.push(format!("{name}->{req}"));
    }
    Ok(format!("{} violated off, blocked on", mapped.join(", ")))
}

fn oracle_equivalence(d: &DataSet) -> Result<String, String> {
    let bounds = ReachBounds {
        max_steps: REACH_DEPTH,
        ..ReachBounds::default()
    };
    ensure(bounds.event_alphabet.len() <= 8, || "alphabet too large".into())?;
    let on = brute_force_reachability(&d.model, &d.config, &bounds, true).map_err(|e| e.to_string())?;
    let off = brute_force_reachability(&d.model, &d.config, &bounds, false).map_err(|e| e.to_string())?;
    for r in [&on, &off] {
        ensure(r.complete, || "state budget exhausted".into())?;
        ensure(r.disagreements.is_empty(), || {
            format!("{} disagreements, first {:?}", r.disagreements.len(), r.disagreements[0])
        })?;
    }
    ensure(!on.unsafe_reachable(), || format!("unsafe exposure reachable when on: {:?}", on.counterexample))?;
    let cx = off
        .counterexample
        .as_ref()
        .ok_or_else(|| "no counterexample when off".to_string())?;
    let replay = run_timeline(&d.model, &d.config, &cx.events, false).map_err(|e| e.to_string())?;
    ensure(replay.violated("R24"), || "counterexample does not violate R24 on replay".into())?;
    Ok(format!(
        "on: {} states safe; off: {} states, counterexample {:?}; {} sequences cross-checked",
        on.explored_states,
        off.explored_states,
        cx.symbols,
        on.cross_checked + off.cross_checked
    ))
}

fn log_completeness(d: &DataSet) -> Result<String, String> {
    let x = Executive::new(&d.model, &d.config, true);
    let input_kinds = [LogKind::PostureChange, LogKind::Interruption, LogKind::Fault, LogKind::Confirmation];
    let mut steps = 0usize;
    for i in 0..LOG_TIMELINES {
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let mut events: Vec<Event> = random_timeline(&mut rng, &Variation::default());
        order_events(&mut events);
        let mut s = x.init().map_err(|e| e.to_string())?;
        let mut prev = s.log.entries().to_vec();
        let mut expected: BTreeMap<(u64, LogKind), usize> = BTreeMap::new();
        for e in &events {
            x.handle_event(&mut s, e).map_err(|e| e.to_string())?;
            steps += 1;
            if let Some(k) = e.kind.log_kind() {
                *expected.entry((e.t, k)).or_default() += 1;
            }
            let now = s.log.entries();
            ensure(now.len() >= prev.len() && now[..prev.len()] == prev[..], || {
                format!("timeline {i}: log rewritten at t={}", e.t)
            })?;
            prev = now.to_vec();
        }
        let mut logged: BTreeMap<(u64, LogKind), usize> = BTreeMap::new();
        for entry in s.log.entries().iter().filter(|e| input_kinds.contains(&e.kind)) {
            *logged.entry((entry.t, entry.kind)).or_default() += 1;
        }
        ensure(expected == logged, || format!("timeline {i}: logged inputs differ"))?;
        ensure(s.log.entries().windows(2).all(|w| w[0].t <= w[1].t), || {
            format!("timeline {i}: timestamps decrease")
        })?;
    }
    Ok(format!("{LOG_TIMELINES} timelines, {steps} events, multiset equal, ordered, append-only"))
}
