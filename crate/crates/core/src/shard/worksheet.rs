use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{applicable_guidewords, ApplicabilityRule, DeviationRecord, Guideword};
use crate::model::{normalize_label, ProcessModel};
use crate::HazardLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SlotStatus {
    Pending,
    Filled,
    #[serde(rename = "justifiedNA")]
    JustifiedNa,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorksheetSlot {
    pub node_id: String,
    pub node_label: String,
    pub guideword: Guideword,
    pub status: SlotStatus,
}

/// One Pending slot per applicable (node, guideword) pair, in model order
/// then guideword order.
pub fn generate_worksheet(m: &ProcessModel, rules: &ApplicabilityRule) -> Vec<WorksheetSlot> {
    m.process_nodes()
        .flat_map(|n| {
            applicable_guidewords(n, rules)
                .into_iter()
                .map(move |g| WorksheetSlot {
                    node_id: n.id.clone(),
                    node_label: n.label.clone(),
                    guideword: g,
                    status: SlotStatus::Pending,
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageReport {
    pub slots: Vec<WorksheetSlot>,
    /// Catalog rows with no matching slot, as `label/guideword`.
    pub drift: Vec<String>,
    /// Slots with no catalog row, as `label/guideword`.
    pub pending: Vec<String>,
    pub filled: usize,
    pub total: usize,
    pub fill_ratio: f64,
}

impl CoverageReport {
    pub fn complete(&self) -> bool {
        self.drift.is_empty() && self.pending.is_empty()
    }
}

/// Match catalog rows to slots by normalized label and guideword.
pub fn coverage_report(slots: &[WorksheetSlot], catalog: &[DeviationRecord]) -> CoverageReport {
    let keyed: BTreeSet<(String, Guideword)> = catalog.iter().map(DeviationRecord::key).collect();
    let slot_keys: BTreeSet<(String, Guideword)> = slots
        .iter()
        .map(|s| (normalize_label(&s.node_label), s.guideword))
        .collect();

    let drift = catalog
        .iter()
        .filter(|r| !slot_keys.contains(&r.key()))
        .map(DeviationRecord::reference)
        .collect();

    let mut pending = Vec::new();
    let slots: Vec<WorksheetSlot> = slots
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if s.status != SlotStatus::JustifiedNa {
                s.status = if keyed.contains(&(normalize_label(&s.node_label), s.guideword)) {
                    SlotStatus::Filled
                } else {
                    pending.push(format!("{}/{}", s.node_label, s.guideword));
                    SlotStatus::Pending
                };
            }
            s
        })
        .collect();
    let filled = slots.iter().filter(|s| s.status == SlotStatus::Filled).count();
    let total = slots.len();
    CoverageReport {
        slots,
        drift,
        pending,
        filled,
        total,
        fill_ratio: if total == 0 { 1.0 } else { filled as f64 / total as f64 },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeCounts {
    pub node: String,
    pub counts: BTreeMap<HazardLevel, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SeverityHistogram {
    pub totals: BTreeMap<HazardLevel, usize>,
    /// In order of first appearance in the catalog.
    pub per_node: Vec<NodeCounts>,
}

impl SeverityHistogram {
    pub fn total(&self) -> usize {
        self.totals.values().sum()
    }

    pub fn node(&self, label: &str) -> Option<&BTreeMap<HazardLevel, usize>> {
        let key = normalize_label(label);
        self.per_node
            .iter()
            .find(|n| normalize_label(&n.node) == key)
            .map(|n| &n.counts)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["node", "high", "medium", "low", "annoyance"])
            .expect("in-memory write");
        for n in &self.per_node {
            let c = |l| n.counts.get(&l).copied().unwrap_or(0).to_string();
            w.write_record([
                n.node.clone(),
                c(HazardLevel::High),
                c(HazardLevel::Medium),
                c(HazardLevel::Low),
                c(HazardLevel::Annoyance),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

pub fn severity_histogram<'a>(
    levels: impl IntoIterator<Item = (&'a str, HazardLevel)>,
) -> SeverityHistogram {
    let mut totals = BTreeMap::new();
    let mut per_node: Vec<NodeCounts> = Vec::new();
    for (node, level) in levels {
        *totals.entry(level).or_insert(0) += 1;
        let key = normalize_label(node);
        let idx = match per_node.iter().position(|n| normalize_label(&n.node) == key) {
            Some(i) => i,
            None => {
                per_node.push(NodeCounts {
                    node: node.to_string(),
                    counts: BTreeMap::new(),
                });
                per_node.len() - 1
            }
        };
        *per_node[idx].counts.entry(level).or_insert(0) += 1;
    }
    SeverityHistogram { totals, per_node }
}

impl DeviationRecord {
    pub fn level_entry(&self) -> (&str, HazardLevel) {
        (self.node_label.as_str(), self.hazard_level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    fn record(label: &str, g: Guideword, level: HazardLevel) -> DeviationRecord {
        DeviationRecord {
            node_label: label.into(),
            guideword: g,
            deviation: format!("{label} {g}"),
            causes: String::new(),
            effects: String::new(),
            detection: String::new(),
            recommendation: String::new(),
            hazard_level: level,
        }
    }

    #[test]
    fn minimal_model_has_five_slots() {
        let m = parse_model("process p\ninitial s\naction a \"Work\" actor=A\nfinal e\nedge s -> a\nedge a -> e\n").unwrap();
        let slots = generate_worksheet(&m, &ApplicabilityRule::default());
        assert_eq!(slots.len(), 5);
        assert_eq!(slots[0].guideword, Guideword::Omission);
        let cov = coverage_report(&slots, &[]);
        assert_eq!(cov.pending.len(), 5);
        assert_eq!(cov.filled, 0);

        let cov = coverage_report(&slots, &[record("WORK", Guideword::Late, HazardLevel::Low), record("Other", Guideword::Late, HazardLevel::Low)]);
        assert_eq!(cov.filled, 1);
        assert_eq!(cov.drift, vec!["Other/Late".to_string()]);
    }

    #[test]
    fn single_row_histogram() {
        let rows = [record("X", Guideword::Value, HazardLevel::High)];
        let h = severity_histogram(rows.iter().map(DeviationRecord::level_entry));
        assert_eq!(h.totals, BTreeMap::from([(HazardLevel::High, 1)]));
        assert_eq!(h.to_csv(), "node,high,medium,low,annoyance\nX,1,0,0,0\n");
    }
}
