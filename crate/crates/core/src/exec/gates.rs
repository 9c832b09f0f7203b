use serde::{Deserialize, Serialize};

use super::{ExecConfig, ExecState, LedgerAction, Millis, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Conjunct {
    PostureValid,
    Stabilization,
    ArmImmobility,
    PatientAssent,
    RadiographerConfirmation,
    NoFault,
    NoInterruption,
    Revalidated,
    MotionLedger,
}

impl Conjunct {
    /// Requirement a refusal on this conjunct cites.
    pub fn requirement(self) -> &'static str {
        match self {
            Conjunct::PostureValid => "R3",
            Conjunct::Stabilization => "R21",
            Conjunct::ArmImmobility => "R24",
            Conjunct::PatientAssent => "R24",
            Conjunct::RadiographerConfirmation => "R20",
            Conjunct::NoFault => "R15",
            Conjunct::NoInterruption => "R14",
            Conjunct::Revalidated => "R23",
            Conjunct::MotionLedger => "R20",
        }
    }
}

pub const EXPOSURE_CONJUNCTS: [Conjunct; 8] = [
    Conjunct::PostureValid,
    Conjunct::Stabilization,
    Conjunct::ArmImmobility,
    Conjunct::PatientAssent,
    Conjunct::RadiographerConfirmation,
    Conjunct::NoFault,
    Conjunct::NoInterruption,
    Conjunct::Revalidated,
];

pub const MOTION_CONJUNCTS: [Conjunct; 5] = [
    Conjunct::PostureValid,
    Conjunct::NoInterruption,
    Conjunct::NoFault,
    Conjunct::Revalidated,
    Conjunct::MotionLedger,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GateDecision {
    pub allowed: bool,
    pub failed_conditions: Vec<Conjunct>,
}

impl GateDecision {
    fn from_checks(checks: impl IntoIterator<Item = (Conjunct, bool)>) -> Self {
        let failed_conditions: Vec<Conjunct> = checks
            .into_iter()
            .filter(|(_, ok)| !ok)
            .map(|(c, _)| c)
            .collect();
        GateDecision {
            allowed: failed_conditions.is_empty(),
            failed_conditions,
        }
    }

    /// Requirement cited by the first failed conjunct.
    pub fn cites(&self) -> Option<&'static str> {
        self.failed_conditions.first().map(|c| c.requirement())
    }
}

/// `since` set and `now - since >= window`.
pub fn stabilization_elapsed(s: &ExecState, now: Millis) -> bool {
    s.posture_stable_since
        .is_some_and(|since| now >= since && now - since >= s.stabilization_window_ms)
}

fn holds(s: &ExecState, c: Conjunct, cfg: Option<&ExecConfig>) -> bool {
    let now = s.clock;
    let stale = s.staleness_window_ms;
    match c {
        Conjunct::PostureValid => s.posture_valid,
        Conjunct::Stabilization => stabilization_elapsed(s, now),
        Conjunct::ArmImmobility => !s.arm_moving,
        Conjunct::PatientAssent => s.ledger.is_fresh(LedgerAction::Exposure, Source::Patient, now, stale),
        Conjunct::RadiographerConfirmation => {
            s.ledger
                .is_fresh(LedgerAction::Exposure, Source::Radiographer, now, stale)
        }
        Conjunct::NoFault => !s.fault_active,
        Conjunct::NoInterruption => !s.interruption_active,
        Conjunct::Revalidated => !s.revalidation_required,
        Conjunct::MotionLedger => cfg.is_some_and(|cfg| {
            s.ledger.satisfied(
                LedgerAction::MotionStart,
                &cfg.required_sources(LedgerAction::MotionStart),
                now,
                stale,
            )
        }),
    }
}

/// Exposure interlock: every one of [`EXPOSURE_CONJUNCTS`] must hold at `s.clock`.
pub fn gate_exposure(s: &ExecState) -> GateDecision {
    GateDecision::from_checks(EXPOSURE_CONJUNCTS.map(|c| (c, holds(s, c, None))))
}

pub fn gate_motion(s: &ExecState, cfg: &ExecConfig) -> GateDecision {
    GateDecision::from_checks(MOTION_CONJUNCTS.map(|c| (c, holds(s, c, Some(cfg)))))
}

/// Acceptance of a trajectory plan: stable valid posture, no fault or stop.
pub fn gate_plan(s: &ExecState) -> GateDecision {
    GateDecision::from_checks(
        [
            Conjunct::PostureValid,
            Conjunct::Stabilization,
            Conjunct::NoFault,
            Conjunct::NoInterruption,
        ]
        .map(|c| (c, holds(s, c, None))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExecState {
        let mut s = ExecState::fresh("n".into(), 2000, 10_000);
        s.clock = 50_000;
        s
    }

    fn set_exposure(s: &mut ExecState, bits: u32) {
        let on = |i: u32| bits & (1 << i) != 0;
        s.posture_valid = on(0);
        s.posture_stable_since = on(1).then_some(s.clock - 2500);
        s.arm_moving = !on(2);
        if on(3) {
            s.ledger.record(LedgerAction::Exposure, Source::Patient, s.clock - 100);
        }
        if on(4) {
            s.ledger
                .record(LedgerAction::Exposure, Source::Radiographer, s.clock - 100);
        }
        s.fault_active = !on(5);
        s.interruption_active = !on(6);
        s.revalidation_required = !on(7);
    }

    #[test]
    fn exposure_truth_table_has_one_allowed_row() {
        let mut allowed = 0;
        for bits in 0..256u32 {
            let mut s = base();
            set_exposure(&mut s, bits);
            let d = gate_exposure(&s);
            let expected_failed = (0..8).filter(|i| bits & (1 << i) == 0).count();
            assert_eq!(d.failed_conditions.len(), expected_failed);
            if d.allowed {
                allowed += 1;
                assert_eq!(bits, 255);
            }
        }
        assert_eq!(allowed, 1);
    }

    #[test]
    fn arm_moving_alone_is_reported() {
        let mut s = base();
        set_exposure(&mut s, 255);
        s.arm_moving = true;
        let d = gate_exposure(&s);
        assert_eq!(d.failed_conditions, vec![Conjunct::ArmImmobility]);
    }

    #[test]
    fn stabilization_boundary() {
        let mut s = base();
        s.posture_stable_since = Some(1000);
        assert!(!stabilization_elapsed(&s, 2999));
        assert!(stabilization_elapsed(&s, 3000));
        assert!(stabilization_elapsed(&s, 3001));
        s.posture_stable_since = None;
        assert!(!stabilization_elapsed(&s, 99_999));
    }

    #[test]
    fn motion_revalidation_cites_r23() {
        let cfg = ExecConfig::default();
        let mut s = base();
        s.posture_valid = true;
        s.ledger.record(LedgerAction::MotionStart, Source::Patient, s.clock);
        s.ledger.record(LedgerAction::MotionStart, Source::Radiographer, s.clock);
        assert!(gate_motion(&s, &cfg).allowed);
        s.revalidation_required = true;
        let d = gate_motion(&s, &cfg);
        assert!(!d.allowed);
        assert_eq!(d.cites(), Some("R23"));
    }
}
