use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inject::{apply_injection, EventTemplate, Injection, Mutation, Selector, Transform, ValueField};
use super::monitor::{MonitorStatus, Witness, HARD_REQUIREMENTS};
use super::run::{run_timeline, Outcome, TraceStatus};
use super::timeline::{random_timeline, Variation};
use crate::exec::{ActionRole, Command, Event, EventKind, ExecConfig, Payload, Source, View};
use crate::model::{normalize_label, NodeKind, ProcessModel};
use crate::shard::{DeviationRecord, Guideword};
use crate::stpa::{CueRecord, UcaCategory, UcaRecord, UcaRole};

/// Catalog rows injections are drawn from.
#[derive(Debug, Clone, Copy)]
pub struct CampaignCatalogs<'a> {
    pub shard: &'a [DeviationRecord],
    pub ucas: &'a [UcaRecord],
    pub cues: &'a [CueRecord],
}

impl CampaignCatalogs<'_> {
    fn len(&self) -> usize {
        self.shard.len() + self.ucas.len() + self.cues.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ViolationSample {
    pub scenario: usize,
    pub requirement: String,
    pub witness: Option<Witness>,
    pub source_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CampaignReport {
    pub schema_version: u32,
    pub seed: u64,
    pub scenarios: usize,
    pub executive_enabled: bool,
    pub config_hash: String,
    pub outcomes: BTreeMap<Outcome, usize>,
    pub statuses: BTreeMap<TraceStatus, usize>,
    pub verdicts: BTreeMap<String, BTreeMap<MonitorStatus, usize>>,
    pub injections_applied: usize,
    pub injections_skipped: usize,
    pub injections_by_catalog: BTreeMap<String, usize>,
    pub violation_samples: Vec<ViolationSample>,
}

const SAMPLE_CAP: usize = 25;

impl CampaignReport {
    pub fn violations(&self, requirement: &str) -> usize {
        self.verdicts
            .get(requirement)
            .and_then(|m| m.get(&MonitorStatus::Violated))
            .copied()
            .unwrap_or(0)
    }

    /// Violations on the requirements the executive must uphold.
    pub fn hard_violations(&self) -> usize {
        HARD_REQUIREMENTS.iter().map(|r| self.violations(r)).sum()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# Campaign summary\n");
        let _ = writeln!(
            md,
            "{} scenarios, seed {}, executive {}, config `{}`\n",
            self.scenarios,
            self.seed,
            if self.executive_enabled { "enabled" } else { "disabled" },
            &self.config_hash[..12.min(self.config_hash.len())]
        );
        let _ = writeln!(md, "| outcome | count |\n|---|---|");
        for (o, n) in &self.outcomes {
            let _ = writeln!(md, "| {o:?} | {n} |");
        }
        let _ = writeln!(md, "\n| requirement | satisfied | violated | n/a |\n|---|---|---|---|");
        for (r, m) in &self.verdicts {
            let g = |s| m.get(&s).copied().unwrap_or(0);
            let _ = writeln!(
                md,
                "| {r} | {} | {} | {} |",
                g(MonitorStatus::Satisfied),
                g(MonitorStatus::Violated),
                g(MonitorStatus::NotApplicable)
            );
        }
        let _ = writeln!(
            md,
            "\nInjections applied: {}, skipped (no matching event): {}",
            self.injections_applied, self.injections_skipped
        );
        if !self.violation_samples.is_empty() {
            let _ = writeln!(md, "\n## Violations\n");
            for v in &self.violation_samples {
                let why = v.witness.as_ref().map_or("", |w| w.explanation.as_str());
                let _ = writeln!(md, "- scenario {} {}: {} ({})", v.scenario, v.requirement, why, v.source_refs.join(", "));
            }
        }
        md
    }
}

/// Event a process node is exercised through.
fn node_event(m: &ProcessModel, cfg: &ExecConfig, label: &str) -> Option<(Selector, EventTemplate)> {
    let key = normalize_label(label);
    let node = m.process_nodes().find(|n| normalize_label(&n.label) == key)?;
    let cmd = |source, c| {
        (
            Selector::command(c).from_source(source),
            EventTemplate {
                source,
                kind: EventKind::CommandConfirm,
                payload: Payload {
                    command: Some(c),
                    valid: Some(true),
                    ..Payload::default()
                },
            },
        )
    };
    let ev = |source, kind| {
        (
            Selector::kind(kind).from_source(source),
            EventTemplate {
                source,
                kind,
                payload: Payload::default(),
            },
        )
    };
    let stage = || {
        let (s, mut t) = cmd(Source::System, Command::Stage);
        t.payload.view = Some(View::Cc.as_str().into());
        (s, t)
    };
    let posture = || {
        let (s, mut t) = ev(Source::Sensor, EventKind::PostureUpdate);
        t.payload.valid = Some(true);
        (s, t)
    };
    let image = || {
        let (s, mut t) = ev(Source::Sensor, EventKind::ExposureComplete);
        t.payload.valid = Some(true);
        (s, t)
    };
    Some(match node.kind {
        NodeKind::Action => match cfg.role_of(&node.id) {
            ActionRole::Initialise => cmd(Source::System, Command::SelfTest),
            ActionRole::IdentifyStage => stage(),
            ActionRole::DeterminePosture => posture(),
            ActionRole::PlanTrajectory => cmd(Source::System, Command::Plan),
            ActionRole::ArmMotion => cmd(Source::Radiographer, Command::MotionStart),
            ActionRole::Adjustment => cmd(Source::Radiographer, Command::Advance),
            ActionRole::Exposure => ev(Source::Radiographer, EventKind::ExposureRequest),
            ActionRole::Release => cmd(Source::Radiographer, Command::Release),
            ActionRole::Generic => return None,
        },
        NodeKind::Decision => match node.guard.as_deref()? {
            "systemReady" => cmd(Source::System, Command::SelfTest),
            "processStageIdentified" => stage(),
            "postureDetected" => posture(),
            "trajectoryValid" => cmd(Source::System, Command::Plan),
            "faultDetected" => {
                let (s, mut t) = ev(Source::Sensor, EventKind::Fault);
                t.payload.code = Some(7);
                (s, t)
            }
            "interruptionHRI" => ev(Source::Patient, EventKind::VoiceStop),
            "patientOK" => ev(Source::Patient, EventKind::Assent),
            "adjustmentsNeeded" => cmd(Source::Radiographer, Command::RequestAdjustment),
            "retakeNeeded" | "processDone" => image(),
            _ => return None,
        },
        _ => return None,
    })
}

fn completion_event(sel: &Selector) -> Selector {
    match (sel.kind, sel.command) {
        (EventKind::CommandConfirm, Some(Command::MotionStart)) => Selector::kind(EventKind::MotionComplete),
        (EventKind::ExposureRequest, _) => Selector::kind(EventKind::ExposureComplete),
        _ => sel.clone(),
    }
}

fn value_field(sel: &Selector) -> ValueField {
    match (sel.kind, sel.command) {
        (EventKind::CommandConfirm, Some(Command::Stage)) => ValueField::View,
        (EventKind::Fault, _) => ValueField::Code,
        _ => ValueField::Valid,
    }
}

const MUTATIONS: [Mutation; 4] = [Mutation::Negate, Mutation::Zero, Mutation::OutOfRange, Mutation::StaleDuplicate];

struct Draft {
    target: Selector,
    transform: Transform,
}

fn pick_ordinal<R: Rng>(rng: &mut R, sel: Selector, tl: &[Event]) -> Option<Selector> {
    let n = sel.matches(tl).len();
    (n > 0).then(|| {
        let k = rng.gen_range(0..n);
        sel.nth(k)
    })
}

fn random_anchor<R: Rng>(rng: &mut R, tl: &[Event]) -> Selector {
    let e = &tl[rng.gen_range(0..tl.len())];
    let mut sel = Selector::kind(e.kind).from_source(e.source);
    sel.command = e.payload.command;
    let idx = sel.matches(tl).iter().position(|&i| tl[i] == *e).unwrap_or(0);
    sel.nth(idx)
}

fn guideword_draft<R: Rng>(
    rng: &mut R,
    g: Guideword,
    sel: Selector,
    template: EventTemplate,
    tl: &[Event],
) -> Option<Draft> {
    Some(match g {
        Guideword::Omission => Draft {
            target: pick_ordinal(rng, sel, tl)?,
            transform: Transform::Drop,
        },
        Guideword::Commission => Draft {
            target: random_anchor(rng, tl),
            transform: Transform::SpuriousInsert {
                event: template,
                offset_ms: rng.gen_range(0..=3000),
            },
        },
        Guideword::Early => Draft {
            target: pick_ordinal(rng, sel, tl)?,
            transform: Transform::ShiftEarly {
                delta_ms: rng.gen_range(100..=3000),
            },
        },
        Guideword::Late => Draft {
            target: pick_ordinal(rng, sel, tl)?,
            transform: Transform::ShiftLate {
                delta_ms: rng.gen_range(100..=6000),
            },
        },
        Guideword::Value => {
            let field = value_field(&sel);
            Draft {
                target: pick_ordinal(rng, sel, tl)?,
                transform: Transform::CorruptValue {
                    field,
                    mutation: *MUTATIONS.choose(rng).expect("non-empty"),
                },
            }
        }
    })
}

fn patient(kind: EventKind) -> EventTemplate {
    EventTemplate {
        source: if kind == EventKind::Assent || kind == EventKind::VoiceStop {
            Source::Patient
        } else {
            Source::Sensor
        },
        kind,
        payload: Payload::default(),
    }
}

fn uca_draft<R: Rng>(
    rng: &mut R,
    u: &UcaRecord,
    m: &ProcessModel,
    cfg: &ExecConfig,
    tl: &[Event],
) -> Option<Draft> {
    let (sel, template) = node_event(m, cfg, &u.node_label)?;
    match u.role {
        UcaRole::R => {
            let g = match u.category {
                UcaCategory::NotProvided => Guideword::Omission,
                UcaCategory::ProvidedUnsafe => {
                    if rng.gen_bool(0.5) {
                        Guideword::Commission
                    } else {
                        Guideword::Value
                    }
                }
                UcaCategory::WrongTimingOrSequence => {
                    if rng.gen_bool(0.7) {
                        Guideword::Early
                    } else {
                        Guideword::Late
                    }
                }
                UcaCategory::WrongDurationOrPersistence => {
                    return Some(Draft {
                        target: pick_ordinal(rng, completion_event(&sel), tl)?,
                        transform: Transform::ShiftLate {
                            delta_ms: rng.gen_range(500..=8000),
                        },
                    });
                }
            };
            guideword_draft(rng, g, sel, template, tl)
        }
        UcaRole::P => {
            let assent = Selector::kind(EventKind::Assent).from_source(Source::Patient);
            let anchor = pick_ordinal(rng, sel, tl).unwrap_or_else(|| random_anchor(rng, tl));
            let insert = |rng: &mut R, kind| Draft {
                target: anchor.clone(),
                transform: Transform::SpuriousInsert {
                    event: patient(kind),
                    offset_ms: rng.gen_range(0..=2000),
                },
            };
            Some(match u.category {
                UcaCategory::NotProvided => Draft {
                    target: pick_ordinal(rng, assent, tl)?,
                    transform: Transform::Drop,
                },
                UcaCategory::ProvidedUnsafe => insert(rng, EventKind::MovementDetected),
                UcaCategory::WrongTimingOrSequence => {
                    if rng.gen_bool(0.5) {
                        insert(rng, EventKind::VoiceStop)
                    } else {
                        Draft {
                            target: pick_ordinal(rng, assent, tl)?,
                            transform: Transform::ShiftEarly {
                                delta_ms: rng.gen_range(100..=3000),
                            },
                        }
                    }
                }
                UcaCategory::WrongDurationOrPersistence => insert(rng, EventKind::PostureUnstable),
            })
        }
    }
}

fn cue_draft<R: Rng>(
    rng: &mut R,
    c: &CueRecord,
    m: &ProcessModel,
    cfg: &ExecConfig,
    tl: &[Event],
) -> Option<Draft> {
    let labels: Vec<&str> = m.process_nodes().map(|n| n.label.as_str()).collect();
    let (sel, template) = node_event(m, cfg, labels.choose(rng)?)?;
    let g = match c.id.as_str() {
        "CUE01" => Guideword::Omission,
        "CUE04" => {
            if rng.gen_bool(0.5) {
                Guideword::Early
            } else {
                Guideword::Late
            }
        }
        "CUE05" => {
            let c = if rng.gen_bool(0.5) { Command::MotionStart } else { Command::Exposure };
            let event = if c == Command::MotionStart {
                EventTemplate {
                    source: Source::Radiographer,
                    kind: EventKind::CommandConfirm,
                    payload: Payload {
                        command: Some(c),
                        ..Payload::default()
                    },
                }
            } else {
                patient(EventKind::ExposureRequest).with_source(Source::Radiographer)
            };
            return Some(Draft {
                target: random_anchor(rng, tl),
                transform: Transform::SpuriousInsert {
                    event,
                    offset_ms: rng.gen_range(0..=3000),
                },
            });
        }
        "CUE06" => Guideword::Late,
        _ => Guideword::Value,
    };
    guideword_draft(rng, g, sel, template, tl)
}

impl EventTemplate {
    fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }
}

struct Generated {
    events: Vec<Event>,
    refs: Vec<String>,
    applied: usize,
    skipped: usize,
    by_catalog: [usize; 3],
}

fn generate(
    rng: &mut ChaCha8Rng,
    m: &ProcessModel,
    cfg: &ExecConfig,
    cat: &CampaignCatalogs,
) -> Generated {
    let mut tl = random_timeline(rng, &Variation::default());
    let mut g = Generated {
        events: Vec::new(),
        refs: Vec::new(),
        applied: 0,
        skipped: 0,
        by_catalog: [0; 3],
    };
    if cat.len() > 0 {
        for _ in 0..rng.gen_range(1..=3) {
            let k = rng.gen_range(0..cat.len());
            let (draft, reference, which) = if k < cat.shard.len() {
                let r = &cat.shard[k];
                let d = node_event(m, cfg, &r.node_label)
                    .and_then(|(sel, tpl)| guideword_draft(rng, r.guideword, sel, tpl, &tl));
                (d, format!("SHARD:{}", r.reference()), 0)
            } else if k < cat.shard.len() + cat.ucas.len() {
                let u = &cat.ucas[k - cat.shard.len()];
                (uca_draft(rng, u, m, cfg, &tl), u.id.clone(), 1)
            } else {
                let c = &cat.cues[k - cat.shard.len() - cat.ucas.len()];
                (cue_draft(rng, c, m, cfg, &tl), c.id.clone(), 2)
            };
            let applied = draft.and_then(|d| {
                let inj = Injection {
                    target: d.target,
                    transform: d.transform,
                    source_ref: Some(reference.clone()),
                };
                apply_injection(&tl, &inj).ok()
            });
            match applied {
                Some(next) => {
                    tl = next;
                    g.applied += 1;
                    g.by_catalog[which] += 1;
                    g.refs.push(reference);
                }
                None => g.skipped += 1,
            }
        }
    }
    g.events = tl;
    g
}

struct Summary {
    outcome: Outcome,
    status: TraceStatus,
    verdicts: Vec<(String, MonitorStatus, Option<Witness>)>,
    refs: Vec<String>,
    applied: usize,
    skipped: usize,
    by_catalog: [usize; 3],
}

/// Seeded random campaign. Scenario `i` draws from stream `i` of a ChaCha8
/// generator seeded with `seed`, so results do not depend on thread count.
pub fn run_random_campaign(
    m: &ProcessModel,
    cfg: &ExecConfig,
    catalogs: CampaignCatalogs,
    n: usize,
    seed: u64,
    executive_enabled: bool,
) -> CampaignReport {
    let summaries: Vec<Summary> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let g = generate(&mut rng, m, cfg, &catalogs);
            let run = run_timeline(m, cfg, &g.events, executive_enabled)
                .expect("generated timelines are ordered and the model is valid");
            Summary {
                outcome: run.outcome,
                status: run.trace.status,
                verdicts: run
                    .verdicts
                    .into_iter()
                    .map(|v| (v.requirement, v.status, v.witness))
                    .collect(),
                refs: g.refs,
                applied: g.applied,
                skipped: g.skipped,
                by_catalog: g.by_catalog,
            }
        })
        .collect();

    let mut report = CampaignReport {
        schema_version: 1,
        seed,
        scenarios: n,
        executive_enabled,
        config_hash: cfg.hash(),
        outcomes: BTreeMap::new(),
        statuses: BTreeMap::new(),
        verdicts: BTreeMap::new(),
        injections_applied: 0,
        injections_skipped: 0,
        injections_by_catalog: BTreeMap::new(),
        violation_samples: Vec::new(),
    };
    for (i, s) in summaries.into_iter().enumerate() {
        *report.outcomes.entry(s.outcome).or_default() += 1;
        *report.statuses.entry(s.status).or_default() += 1;
        report.injections_applied += s.applied;
        report.injections_skipped += s.skipped;
        for (name, count) in ["SHARD", "UCA", "CUE"].into_iter().zip(s.by_catalog) {
            *report.injections_by_catalog.entry(name.to_string()).or_default() += count;
        }
        for (req, status, witness) in s.verdicts {
            if status == MonitorStatus::Violated && report.violation_samples.len() < SAMPLE_CAP {
                report.violation_samples.push(ViolationSample {
                    scenario: i,
                    requirement: req.clone(),
                    witness,
                    source_refs: s.refs.clone(),
                });
            }
            *report.verdicts.entry(req).or_default().entry(status).or_default() += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataSet;

    fn cats(d: &DataSet) -> CampaignCatalogs<'_> {
        CampaignCatalogs {
            shard: &d.shard,
            ucas: &d.ucas,
            cues: &d.cues,
        }
    }

    #[test]
    fn single_scenario_report() {
        let d = DataSet::canonical();
        let r = run_random_campaign(&d.model, &d.config, cats(&d), 1, 42, true);
        assert_eq!(r.scenarios, 1);
        assert_eq!(r.outcomes.values().sum::<usize>(), 1);
    }

    #[test]
    fn same_seed_same_bytes() {
        let d = DataSet::canonical();
        let a = run_random_campaign(&d.model, &d.config, cats(&d), 200, 9, true);
        let b = run_random_campaign(&d.model, &d.config, cats(&d), 200, 9, true);
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.hard_violations(), 0, "{}", a.to_markdown());
        let c = run_random_campaign(&d.model, &d.config, cats(&d), 200, 10, true);
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn catalog_rows_map_to_events() {
        let d = DataSet::canonical();
        for r in &d.shard {
            assert!(node_event(&d.model, &d.config, &r.node_label).is_some(), "{}", r.node_label);
        }
        for u in &d.ucas {
            assert!(node_event(&d.model, &d.config, &u.node_label).is_some(), "{}", u.id);
        }
    }
}
