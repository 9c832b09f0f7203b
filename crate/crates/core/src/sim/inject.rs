use serde::{Deserialize, Serialize};

use crate::exec::{Command, Event, EventKind, Millis, Payload, Source, View};
use crate::shard::Guideword;

/// Which events an injection applies to. With neither `ordinal` nor
/// `timeRange` every event of the kind matches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Selector {
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// 0-based among events matching kind, source and command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<usize>,
    /// Inclusive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_range: Option<(Millis, Millis)>,
}

impl Selector {
    pub fn kind(kind: EventKind) -> Self {
        Selector {
            kind,
            source: None,
            command: None,
            ordinal: None,
            time_range: None,
        }
    }

    pub fn command(command: Command) -> Self {
        Selector {
            command: Some(command),
            ..Selector::kind(EventKind::CommandConfirm)
        }
    }

    pub fn from_source(mut self, source: Source) -> Self {
        self.source = Some(source);
        self
    }

    pub fn nth(mut self, ordinal: usize) -> Self {
        self.ordinal = Some(ordinal);
        self
    }

    fn base_match(&self, e: &Event) -> bool {
        e.kind == self.kind
            && self.source.map_or(true, |s| s == e.source)
            && self.command.map_or(true, |c| e.payload.command == Some(c))
    }

    /// Indices into `timeline` selected by this selector.
    pub fn matches(&self, timeline: &[Event]) -> Vec<usize> {
        timeline
            .iter()
            .enumerate()
            .filter(|(_, e)| self.base_match(e))
            .enumerate()
            .filter(|(n, (_, e))| {
                self.ordinal.map_or(true, |o| o == *n)
                    && self.time_range.map_or(true, |(a, b)| a <= e.t && e.t <= b)
            })
            .map(|(_, (i, _))| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ValueField {
    Valid,
    View,
    Code,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Mutation {
    Negate,
    Zero,
    OutOfRange,
    /// Take the value from the previous event of the same kind.
    StaleDuplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventTemplate {
    pub source: Source,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Payload::is_empty")]
    pub payload: Payload,
}

impl EventTemplate {
    pub fn at(&self, t: Millis) -> Event {
        Event {
            t,
            source: self.source,
            kind: self.kind,
            payload: self.payload.clone(),
        }
    }
}

impl From<&Event> for EventTemplate {
    fn from(e: &Event) -> Self {
        EventTemplate {
            source: e.source,
            kind: e.kind,
            payload: e.payload.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "type")]
pub enum Transform {
    Drop,
    /// Insert `event` at each selected event's time plus `offsetMs`.
    #[serde(rename_all = "camelCase")]
    SpuriousInsert { event: EventTemplate, offset_ms: i64 },
    #[serde(rename_all = "camelCase")]
    ShiftEarly { delta_ms: Millis },
    #[serde(rename_all = "camelCase")]
    ShiftLate { delta_ms: Millis },
    CorruptValue { field: ValueField, mutation: Mutation },
}

impl Transform {
    /// The transform family each guideword maps to.
    pub fn guideword(&self) -> Guideword {
        match self {
            Transform::Drop => Guideword::Omission,
            Transform::SpuriousInsert { .. } => Guideword::Commission,
            Transform::ShiftEarly { .. } => Guideword::Early,
            Transform::ShiftLate { .. } => Guideword::Late,
            Transform::CorruptValue { .. } => Guideword::Value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Injection {
    pub target: Selector,
    pub transform: Transform,
    /// SHARD row (`SHARD:<label>/<guideword>`), UCA or CUE id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InjectError {
    #[error("selector {0:?} matches no event")]
    NoMatch(Selector),
    #[error("shift moves event at t={t} before time zero")]
    NegativeTime { t: Millis },
}

fn offset(t: Millis, by: i64) -> Result<Millis, InjectError> {
    t.checked_add_signed(by).ok_or(InjectError::NegativeTime { t })
}

fn corrupt(e: &mut Event, prev: Option<&Event>, field: ValueField, m: Mutation) {
    let p = &mut e.payload;
    match field {
        ValueField::Valid => {
            let v = p.valid.unwrap_or(true);
            p.valid = Some(match m {
                Mutation::Negate => !v,
                Mutation::Zero | Mutation::OutOfRange => false,
                Mutation::StaleDuplicate => prev.map_or(v, |q| q.payload.valid.unwrap_or(true)),
            });
        }
        ValueField::View => {
            p.view = match m {
                Mutation::Negate => {
                    let cur = p.view.as_deref().and_then(|v| v.parse::<View>().ok());
                    Some(
                        match cur {
                            Some(View::Cc) => View::MloL,
                            Some(View::MloL) => View::MloR,
                            Some(View::MloR) | None => View::Cc,
                        }
                        .as_str()
                        .to_string(),
                    )
                }
                Mutation::Zero => None,
                Mutation::OutOfRange => Some("MLO-X".to_string()),
                Mutation::StaleDuplicate => prev.and_then(|q| q.payload.view.clone()),
            };
        }
        ValueField::Code => {
            let c = p.code.unwrap_or(0);
            p.code = Some(match m {
                Mutation::Negate => -c,
                Mutation::Zero => 0,
                Mutation::OutOfRange => i64::MAX,
                Mutation::StaleDuplicate => prev.and_then(|q| q.payload.code).unwrap_or(c),
            });
        }
    }
}

/// Apply one injection. The result is sorted by time; ties keep their
/// relative order.
pub fn apply_injection(timeline: &[Event], inj: &Injection) -> Result<Vec<Event>, InjectError> {
    let hits = inj.target.matches(timeline);
    if hits.is_empty() {
        return Err(InjectError::NoMatch(inj.target.clone()));
    }
    let mut out = timeline.to_vec();
    match &inj.transform {
        Transform::Drop => {
            let mut i = 0;
            out.retain(|_| {
                let keep = !hits.contains(&i);
                i += 1;
                keep
            });
        }
        Transform::SpuriousInsert { event, offset_ms } => {
            for &h in &hits {
                out.push(event.at(offset(timeline[h].t, *offset_ms)?));
            }
            out.sort_by_key(|e| e.t);
        }
        Transform::ShiftEarly { delta_ms } | Transform::ShiftLate { delta_ms } => {
            let early = matches!(inj.transform, Transform::ShiftEarly { .. });
            for &h in &hits {
                let t = out[h].t;
                out[h].t = if early {
                    t.checked_sub(*delta_ms).ok_or(InjectError::NegativeTime { t })?
                } else {
                    t + delta_ms
                };
            }
            out.sort_by_key(|e| e.t);
        }
        Transform::CorruptValue { field, mutation } => {
            for &h in &hits {
                let prev = timeline[..h].iter().rev().find(|e| {
                    e.kind == timeline[h].kind && e.payload.command == timeline[h].payload.command
                });
                corrupt(&mut out[h], prev, *field, *mutation);
            }
        }
    }
    Ok(out)
}

pub fn apply_all(timeline: &[Event], injections: &[Injection]) -> Result<Vec<Event>, InjectError> {
    let mut tl = timeline.to_vec();
    for inj in injections {
        tl = apply_injection(&tl, inj)?;
    }
    Ok(tl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::nominal_timeline;

    fn inj(target: Selector, transform: Transform) -> Injection {
        Injection {
            target,
            transform,
            source_ref: None,
        }
    }

    #[test]
    fn drop_exposure_request() {
        let tl = nominal_timeline();
        let sel = Selector::kind(EventKind::ExposureRequest).nth(0);
        let out = apply_injection(&tl, &inj(sel, Transform::Drop)).unwrap();
        assert_eq!(out.len(), tl.len() - 1);
        assert_eq!(out.iter().filter(|e| e.kind == EventKind::ExposureRequest).count(), 2);
    }

    #[test]
    fn spurious_request_added() {
        let tl = nominal_timeline();
        let sel = Selector::kind(EventKind::MotionComplete).nth(0);
        let ev = EventTemplate {
            source: Source::Radiographer,
            kind: EventKind::ExposureRequest,
            payload: Payload::default(),
        };
        let out = apply_injection(&tl, &inj(sel, Transform::SpuriousInsert { event: ev, offset_ms: 100 })).unwrap();
        assert_eq!(out.len(), tl.len() + 1);
        assert!(out.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn zero_shift_is_identity() {
        let tl = nominal_timeline();
        let sel = Selector::kind(EventKind::Assent);
        let out = apply_injection(&tl, &inj(sel, Transform::ShiftEarly { delta_ms: 0 })).unwrap();
        assert_eq!(out, tl);
    }

    #[test]
    fn errors() {
        let tl = nominal_timeline();
        let none = Selector::kind(EventKind::Fault);
        assert!(matches!(apply_injection(&tl, &inj(none, Transform::Drop)), Err(InjectError::NoMatch(_))));
        let first = Selector::command(Command::SelfTest);
        assert!(matches!(
            apply_injection(&tl, &inj(first, Transform::ShiftEarly { delta_ms: 1 })),
            Err(InjectError::NegativeTime { t: 0 })
        ));
    }

    #[test]
    fn corrupt_view_out_of_range() {
        let tl = nominal_timeline();
        let sel = Selector::command(Command::Stage).nth(1);
        let out = apply_injection(
            &tl,
            &inj(sel, Transform::CorruptValue { field: ValueField::View, mutation: Mutation::OutOfRange }),
        )
        .unwrap();
        assert_eq!(out.iter().filter(|e| e.payload.view.as_deref() == Some("MLO-X")).count(), 1);
        let stale = apply_injection(
            &tl,
            &inj(
                Selector::command(Command::Stage).nth(2),
                Transform::CorruptValue { field: ValueField::View, mutation: Mutation::StaleDuplicate },
            ),
        )
        .unwrap();
        let views: Vec<_> = stale.iter().filter_map(|e| e.payload.view.clone()).collect();
        assert_eq!(views, vec!["CC", "MLO-L", "MLO-L"]);
    }
}
