use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Millis, Source};

/// Safety-critical actions that need multi-source confirmation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LedgerAction {
    MotionStart,
    Exposure,
    Release,
    Resume,
}

impl LedgerAction {
    pub const ALL: [LedgerAction; 4] = [
        LedgerAction::MotionStart,
        LedgerAction::Exposure,
        LedgerAction::Release,
        LedgerAction::Resume,
    ];
}

/// Latest confirmation per (action, source). Entries are consumed when the
/// action they enable is granted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfirmationLedger {
    received: BTreeMap<LedgerAction, BTreeMap<Source, Millis>>,
}

impl ConfirmationLedger {
    pub fn record(&mut self, action: LedgerAction, source: Source, t: Millis) {
        self.received.entry(action).or_default().insert(source, t);
    }

    pub fn received_at(&self, action: LedgerAction, source: Source) -> Option<Millis> {
        self.received.get(&action).and_then(|m| m.get(&source)).copied()
    }

    /// Fresh means `now - t <= staleness` (closed bound).
    pub fn is_fresh(&self, action: LedgerAction, source: Source, now: Millis, staleness: Millis) -> bool {
        self.received_at(action, source)
            .is_some_and(|t| t <= now && now - t <= staleness)
    }

    /// Required sources lacking a fresh confirmation.
    pub fn missing(
        &self,
        action: LedgerAction,
        required: &BTreeSet<Source>,
        now: Millis,
        staleness: Millis,
    ) -> Vec<Source> {
        required
            .iter()
            .copied()
            .filter(|s| !self.is_fresh(action, *s, now, staleness))
            .collect()
    }

    pub fn satisfied(
        &self,
        action: LedgerAction,
        required: &BTreeSet<Source>,
        now: Millis,
        staleness: Millis,
    ) -> bool {
        self.missing(action, required, now, staleness).is_empty()
    }

    pub fn consume(&mut self, action: LedgerAction) {
        self.received.remove(&action);
    }

    pub fn clear_source(&mut self, source: Source) {
        for m in self.received.values_mut() {
            m.remove(&source);
        }
        self.received.retain(|_, m| !m.is_empty());
    }

    pub fn is_empty(&self) -> bool {
        self.received.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (LedgerAction, Source, Millis)> + '_ {
        self.received
            .iter()
            .flat_map(|(a, m)| m.iter().map(move |(s, t)| (*a, *s, *t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn both() -> BTreeSet<Source> {
        BTreeSet::from([Source::Radiographer, Source::Patient])
    }

    #[test]
    fn needs_every_source() {
        let mut l = ConfirmationLedger::default();
        l.record(LedgerAction::Resume, Source::Radiographer, 100);
        assert!(!l.satisfied(LedgerAction::Resume, &both(), 200, 10_000));
        assert_eq!(l.missing(LedgerAction::Resume, &both(), 200, 10_000), vec![Source::Patient]);
        l.record(LedgerAction::Resume, Source::Patient, 150);
        assert!(l.satisfied(LedgerAction::Resume, &both(), 200, 10_000));
    }

    #[test]
    fn staleness_is_closed() {
        let mut l = ConfirmationLedger::default();
        l.record(LedgerAction::Exposure, Source::Patient, 0);
        assert!(l.is_fresh(LedgerAction::Exposure, Source::Patient, 10_000, 10_000));
        assert!(!l.is_fresh(LedgerAction::Exposure, Source::Patient, 10_001, 10_000));
    }

    #[test]
    fn consume_and_clear() {
        let mut l = ConfirmationLedger::default();
        l.record(LedgerAction::Exposure, Source::Patient, 0);
        l.record(LedgerAction::Release, Source::Patient, 0);
        l.record(LedgerAction::Release, Source::Radiographer, 0);
        l.consume(LedgerAction::Exposure);
        assert!(l.received_at(LedgerAction::Exposure, Source::Patient).is_none());
        l.clear_source(Source::Patient);
        assert_eq!(l.entries().count(), 1);
    }
}
