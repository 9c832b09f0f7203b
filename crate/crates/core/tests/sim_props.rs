use std::collections::HashMap;

use hazgate_core::data::DataSet;
use hazgate_core::exec::{gate_exposure, gate_motion, Event, EventKind, EXPOSURE_CONJUNCTS, MOTION_CONJUNCTS};
use hazgate_core::sim::{
    apply_injection, nominal_timeline, random_timeline, run_random_campaign, run_timeline,
    CampaignCatalogs, Injection, Mutation, Selector, Transform, ValueField, Variation,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn timeline(seed: u64) -> Vec<Event> {
    random_timeline(&mut ChaCha8Rng::seed_from_u64(seed), &Variation::default())
}

fn multiset<T: std::hash::Hash + Eq>(items: impl IntoIterator<Item = T>) -> HashMap<T, usize> {
    let mut out = HashMap::new();
    for i in items {
        *out.entry(i).or_insert(0) += 1;
    }
    out
}

fn kinds_in(events: &[Event]) -> Vec<EventKind> {
    let mut ks: Vec<EventKind> = events.iter().map(|e| e.kind).collect();
    ks.sort();
    ks.dedup();
    ks
}

fn selector(events: &[Event], pick: usize, nth: Option<usize>) -> Selector {
    let ks = kinds_in(events);
    let s = Selector::kind(ks[pick % ks.len()]);
    match nth {
        Some(n) => s.nth(n % 3),
        None => s,
    }
}

fn inject(events: &[Event], target: Selector, transform: Transform) -> Option<Vec<Event>> {
    apply_injection(events, &Injection { target, transform, source_ref: None }).ok()
}

fn field() -> impl Strategy<Value = ValueField> {
    prop_oneof![Just(ValueField::Valid), Just(ValueField::View), Just(ValueField::Code)]
}

fn mutation() -> impl Strategy<Value = Mutation> {
    prop_oneof![
        Just(Mutation::Negate),
        Just(Mutation::Zero),
        Just(Mutation::OutOfRange),
        Just(Mutation::StaleDuplicate),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn drop_yields_sub_multiset(seed in any::<u64>(), pick in 0usize..32, nth in proptest::option::of(0usize..3)) {
        let base = timeline(seed);
        let sel = selector(&base, pick, nth);
        if let Some(out) = inject(&base, sel.clone(), Transform::Drop) {
            let before = multiset(base.iter().cloned());
            let after = multiset(out.iter().cloned());
            prop_assert!(out.len() < base.len());
            for (e, n) in &after {
                prop_assert!(before.get(e).copied().unwrap_or(0) >= *n);
            }
            prop_assert_eq!(base.len() - out.len(), sel.matches(&base).len());
        }
    }

    #[test]
    fn shift_only_moves_timestamps(
        seed in any::<u64>(),
        pick in 0usize..32,
        nth in proptest::option::of(0usize..3),
        delta in 1u64..5000,
        early in any::<bool>(),
    ) {
        let base = timeline(seed);
        let t = if early { Transform::ShiftEarly { delta_ms: delta } } else { Transform::ShiftLate { delta_ms: delta } };
        if let Some(out) = inject(&base, selector(&base, pick, nth), t) {
            let strip = |es: &[Event]| multiset(es.iter().map(|e| (e.source, e.kind, e.payload.clone())));
            prop_assert_eq!(strip(&base), strip(&out));
            prop_assert!(out.windows(2).all(|w| w[0].t <= w[1].t));
        }
    }

    #[test]
    fn corrupt_value_keeps_shape(
        seed in any::<u64>(),
        pick in 0usize..32,
        nth in proptest::option::of(0usize..3),
        f in field(),
        m in mutation(),
    ) {
        let base = timeline(seed);
        let sel = selector(&base, pick, nth);
        if let Some(out) = inject(&base, sel.clone(), Transform::CorruptValue { field: f, mutation: m }) {
            prop_assert_eq!(out.len(), base.len());
            let hits = sel.matches(&base);
            for (i, (a, b)) in base.iter().zip(&out).enumerate() {
                prop_assert_eq!((a.t, a.source, a.kind), (b.t, b.source, b.kind));
                if !hits.contains(&i) {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_are_pure_and_consistent(seed in any::<u64>(), enforce in any::<bool>()) {
        let d = DataSet::canonical();
        let run = run_timeline(&d.model, &d.config, &timeline(seed), enforce).unwrap();
        let s = run.trace.final_state.clone().expect("final state kept");
        let g = gate_exposure(&s);
        prop_assert_eq!(&g, &gate_exposure(&s.clone()));
        prop_assert_eq!(g.allowed, g.failed_conditions.is_empty());
        prop_assert!(g.failed_conditions.iter().all(|c| EXPOSURE_CONJUNCTS.contains(c)));
        let mg = gate_motion(&s, &d.config);
        prop_assert_eq!(&mg, &gate_motion(&s, &d.config));
        prop_assert_eq!(mg.allowed, mg.failed_conditions.is_empty());
        prop_assert!(mg.failed_conditions.iter().all(|c| MOTION_CONJUNCTS.contains(c)));
    }

    #[test]
    fn trace_export_is_deterministic(seed in any::<u64>(), enforce in any::<bool>()) {
        let d = DataSet::canonical();
        let events = timeline(seed);
        let a = run_timeline(&d.model, &d.config, &events, enforce).unwrap();
        let b = run_timeline(&d.model, &d.config, &events, enforce).unwrap();
        prop_assert_eq!(a.trace.to_jsonl(), b.trace.to_jsonl());
        prop_assert_eq!(a.verdicts, b.verdicts);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn small_campaigns_are_sound(seed in any::<u64>()) {
        let d = DataSet::canonical();
        let cats = CampaignCatalogs { shard: &d.shard, ucas: &d.ucas, cues: &d.cues };
        let r = run_random_campaign(&d.model, &d.config, cats, 40, seed, true);
        prop_assert_eq!(r.hard_violations(), 0, "{}", r.to_json());
    }
}

#[test]
fn nominal_drop_of_each_kind_shrinks_by_count() {
    let base = nominal_timeline();
    for k in kinds_in(&base) {
        let n = base.iter().filter(|e| e.kind == k).count();
        let out = inject(&base, Selector::kind(k), Transform::Drop).unwrap();
        assert_eq!(out.len(), base.len() - n);
    }
}
