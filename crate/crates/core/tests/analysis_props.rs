use std::collections::{BTreeMap, BTreeSet};

use hazgate_core::data::DataSet;
use hazgate_core::model::NodeKind;
use hazgate_core::shard::{
    applicable_guidewords, coverage_report, generate_worksheet, severity_histogram, ApplicabilityRule,
    DeviationRecord, Guideword, KindDefaults, Override, SlotStatus,
};
use hazgate_core::stpa::{generate_uca_candidates, CandidateStatus, ControlStructure, UcaCategory};
use hazgate_core::HazardLevel;
use proptest::prelude::*;
use proptest::sample::subsequence;

fn guidewords(mask: u8) -> BTreeSet<Guideword> {
    Guideword::ALL
        .into_iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, g)| g)
        .collect()
}

fn rules(action: u8, decision: u8, overrides: &[(usize, u8)], ids: &[String]) -> ApplicabilityRule {
    let mut seen = BTreeSet::new();
    let overrides = overrides
        .iter()
        .filter(|(i, _)| seen.insert(i % ids.len()))
        .map(|&(i, mask)| Override {
            node: ids[i % ids.len()].clone(),
            guidewords: guidewords(mask),
            justification: "narrowed".into(),
        })
        .collect();
    ApplicabilityRule {
        schema_version: 1,
        defaults: KindDefaults {
            action: guidewords(action),
            decision: guidewords(decision),
        },
        overrides,
    }
}

fn process_ids(d: &DataSet) -> Vec<String> {
    d.model.process_nodes().map(|n| n.id.clone()).collect()
}

fn slot_keys(d: &DataSet, r: &ApplicabilityRule) -> BTreeSet<(String, Guideword)> {
    generate_worksheet(&d.model, r)
        .into_iter()
        .map(|s| (s.node_id, s.guideword))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn slot_count_is_sum_of_applicable(
        action in 0u8..32,
        decision in 0u8..32,
        overrides in prop::collection::vec((0usize..64, 0u8..32), 0..8),
    ) {
        let d = DataSet::canonical();
        let r = rules(action, decision, &overrides, &process_ids(&d));
        let slots = generate_worksheet(&d.model, &r);
        let want: usize = d.model.nodes.iter().map(|n| applicable_guidewords(n, &r).len()).sum();
        prop_assert_eq!(slots.len(), want);
        prop_assert!(slots.iter().all(|s| s.status == SlotStatus::Pending));
        let process_only = slots.iter().all(|s| {
            let k = d.model.node(&s.node_id).unwrap().kind;
            k == NodeKind::Action || k == NodeKind::Decision
        });
        prop_assert!(process_only);

        let mut reversed = r.clone();
        reversed.overrides.reverse();
        prop_assert_eq!(slots, generate_worksheet(&d.model, &reversed));
    }

    #[test]
    fn worksheet_ignores_node_declaration_order(seed in any::<u64>()) {
        let d = DataSet::canonical();
        let mut shuffled = d.model.clone();
        let mut order: Vec<usize> = (0..shuffled.nodes.len()).collect();
        let mut x = seed;
        for i in (1..order.len()).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (x >> 33) as usize % (i + 1));
        }
        shuffled.nodes = order.iter().map(|&i| d.model.nodes[i].clone()).collect();
        let keys: BTreeSet<_> = generate_worksheet(&shuffled, &d.rules)
            .into_iter()
            .map(|s| (s.node_id, s.guideword))
            .collect();
        prop_assert_eq!(slot_keys(&d, &d.rules), keys);
    }

    #[test]
    fn histogram_totals_match_catalog(rows in subsequence((0..128usize).collect::<Vec<_>>(), 0..=128), rev in any::<bool>()) {
        let d = DataSet::canonical();
        let mut picked: Vec<&DeviationRecord> = rows.iter().filter_map(|&i| d.shard.get(i)).collect();
        if rev {
            picked.reverse();
        }
        let h = severity_histogram(picked.iter().map(|r| (r.node_label.as_str(), r.hazard_level)));
        prop_assert_eq!(h.total(), picked.len());
        let per_node: usize = h.per_node.iter().flat_map(|n| n.counts.values()).sum();
        prop_assert_eq!(per_node, picked.len());
        let mut want: BTreeMap<HazardLevel, usize> = BTreeMap::new();
        for r in &picked {
            *want.entry(r.hazard_level).or_default() += 1;
        }
        prop_assert_eq!(h.totals, want);
    }

    #[test]
    fn coverage_pairs_rows_with_slots(rows in subsequence((0..128usize).collect::<Vec<_>>(), 0..=128)) {
        let d = DataSet::canonical();
        let slots = generate_worksheet(&d.model, &d.rules);
        let picked: Vec<DeviationRecord> = rows.iter().filter_map(|&i| d.shard.get(i).cloned()).collect();
        let c = coverage_report(&slots, &picked);
        let keys: BTreeSet<_> = picked.iter().map(DeviationRecord::key).collect();
        prop_assert!(c.drift.is_empty());
        prop_assert_eq!(c.filled, keys.len());
        prop_assert_eq!(c.filled + c.pending.len(), c.total);
        prop_assert_eq!(c.total, slots.len());
    }
}

#[test]
fn full_catalog_fills_every_slot_exactly_once() {
    let d = DataSet::canonical();
    let slots = generate_worksheet(&d.model, &d.rules);
    let c = coverage_report(&slots, &d.shard);
    assert!(c.complete());
    let slot_set: BTreeSet<_> = slots
        .iter()
        .map(|s| (hazgate_core::model::normalize_label(&s.node_label), s.guideword))
        .collect();
    assert_eq!(slot_set.len(), slots.len());
    let rows: BTreeSet<_> = d.shard.iter().map(DeviationRecord::key).collect();
    assert_eq!(rows, slot_set);
}

#[test]
fn four_candidates_per_control_action() {
    let cs = ControlStructure::canonical();
    for a in &cs.control_actions {
        let c = generate_uca_candidates(&cs, a.controller, &a.name).unwrap();
        assert_eq!(c.len(), 4);
        let cats: Vec<UcaCategory> = c.iter().map(|u| u.category).collect();
        assert_eq!(cats, UcaCategory::ALL.to_vec());
        assert!(c.iter().all(|u| u.status == CandidateStatus::Pending && u.action == a.name));
    }
}
