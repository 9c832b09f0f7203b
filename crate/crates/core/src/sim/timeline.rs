use rand::Rng;

use crate::exec::{Command, Event, EventKind, Millis, Source, View};

/// Start of the first view and spacing between views in the nominal script.
pub const FIRST_VIEW_AT: Millis = 100;
pub const VIEW_SPACING: Millis = 8000;

/// Appends events at a moving cursor.
#[derive(Debug, Clone, Default)]
pub struct TimelineBuilder {
    pub t: Millis,
    pub events: Vec<Event>,
}

impl TimelineBuilder {
    pub fn at(&mut self, t: Millis, e: Event) -> &mut Self {
        self.t = self.t.max(t);
        self.events.push(Event { t: self.t, ..e });
        self
    }

    pub fn after(&mut self, dt: Millis, e: Event) -> &mut Self {
        let t = self.t + dt;
        self.at(t, e)
    }

    pub fn finish(self) -> Vec<Event> {
        self.events
    }
}

fn cmd(source: Source, c: Command) -> Event {
    Event::command(0, source, c)
}

fn ev(source: Source, kind: EventKind) -> Event {
    Event::new(0, source, kind)
}

/// The hand-checked session: self-test, then for each of CC, MLO-L and
/// MLO-R stage, posture, plan, assent, motion, exposure and release.
pub fn nominal_timeline() -> Vec<Event> {
    let mut b = TimelineBuilder::default();
    b.at(0, cmd(Source::System, Command::SelfTest).with_valid(true));
    for (i, view) in View::ALL.into_iter().enumerate() {
        let t0 = FIRST_VIEW_AT + VIEW_SPACING * i as Millis;
        b.at(t0, cmd(Source::System, Command::Stage).with_view(view).with_valid(true))
            .at(t0 + 100, ev(Source::Sensor, EventKind::PostureUpdate).with_valid(true))
            .at(t0 + 2200, cmd(Source::System, Command::Plan).with_valid(true))
            .at(t0 + 2400, ev(Source::Patient, EventKind::Assent))
            .at(t0 + 2600, cmd(Source::Radiographer, Command::MotionStart))
            .at(t0 + 4600, ev(Source::Sensor, EventKind::MotionComplete))
            .at(t0 + 4800, ev(Source::Patient, EventKind::Assent))
            .at(t0 + 5000, cmd(Source::Radiographer, Command::Exposure))
            .at(t0 + 6800, ev(Source::Radiographer, EventKind::ExposureRequest))
            .at(t0 + 7300, ev(Source::Sensor, EventKind::ExposureComplete).with_valid(true))
            .at(t0 + 7500, ev(Source::Patient, EventKind::Assent))
            .at(t0 + 7700, cmd(Source::Radiographer, Command::Release));
    }
    b.finish()
}

/// Knobs for randomised sessions.
#[derive(Debug, Clone, Copy)]
pub struct Variation {
    pub max_jitter: Millis,
    pub adjustment_probability: f64,
    pub retake_probability: f64,
    pub stop_probability: f64,
    pub fault_probability: f64,
    pub movement_probability: f64,
}

impl Default for Variation {
    fn default() -> Self {
        Variation {
            max_jitter: 400,
            adjustment_probability: 0.2,
            retake_probability: 0.15,
            stop_probability: 0.15,
            fault_probability: 0.08,
            movement_probability: 0.1,
        }
    }
}

/// A nominal-shaped session with random gaps, optional adjustment and
/// retake loops, and occasional stops, faults and patient movement.
pub fn random_timeline<R: Rng>(rng: &mut R, var: &Variation) -> Vec<Event> {
    let mut b = TimelineBuilder::default();
    let j = |rng: &mut R, base: Millis| base + rng.gen_range(0..=var.max_jitter);
    b.at(0, cmd(Source::System, Command::SelfTest).with_valid(true));
    for view in View::ALL {
        let d = j(rng, 100);
        b.after(d, cmd(Source::System, Command::Stage).with_view(view).with_valid(true));
        let d = j(rng, 100);
        b.after(d, ev(Source::Sensor, EventKind::PostureUpdate).with_valid(true));
        let d = j(rng, 2100);
        b.after(d, cmd(Source::System, Command::Plan).with_valid(true));
        let d = j(rng, 200);
        b.after(d, ev(Source::Patient, EventKind::Assent));
        let d = j(rng, 200);
        b.after(d, cmd(Source::Radiographer, Command::MotionStart));
        if rng.gen_bool(var.stop_probability) {
            let d = j(rng, 300);
            let who = if rng.gen_bool(0.5) { Source::Patient } else { Source::Radiographer };
            let kind = if who == Source::Patient { EventKind::VoiceStop } else { EventKind::UiStop };
            b.after(d, ev(who, kind));
            let d = j(rng, 300);
            b.after(d, ev(Source::Radiographer, EventKind::ResumeRequest));
            let d = j(rng, 200);
            b.after(d, ev(Source::Patient, EventKind::ResumeRequest));
            // back through posture detection and planning
            let d = j(rng, 100);
            b.after(d, ev(Source::Sensor, EventKind::PostureUpdate).with_valid(true));
            let d = j(rng, 2100);
            b.after(d, cmd(Source::System, Command::Plan).with_valid(true));
            let d = j(rng, 200);
            b.after(d, ev(Source::Patient, EventKind::Assent));
            let d = j(rng, 200);
            b.after(d, cmd(Source::Radiographer, Command::MotionStart));
        }
        if rng.gen_bool(var.fault_probability) {
            let d = j(rng, 200);
            b.after(d, ev(Source::Sensor, EventKind::Fault).with_code(rng.gen_range(1..100)));
            let d = j(rng, 500);
            b.after(d, ev(Source::Sensor, EventKind::FaultCleared));
        }
        if rng.gen_bool(var.movement_probability) {
            let d = j(rng, 300);
            b.after(d, ev(Source::Sensor, EventKind::MovementDetected));
        }
        if rng.gen_bool(var.adjustment_probability) {
            let d = j(rng, 500);
            b.after(d, cmd(Source::Radiographer, Command::RequestAdjustment));
        }
        let d = j(rng, 1500);
        b.after(d, ev(Source::Sensor, EventKind::MotionComplete));
        let d = j(rng, 100);
        b.after(d, cmd(Source::Radiographer, Command::Advance));
        let retake = rng.gen_bool(var.retake_probability);
        for attempt in 0..=usize::from(retake) {
            let d = j(rng, 200);
            b.after(d, ev(Source::Patient, EventKind::Assent));
            let d = j(rng, 200);
            b.after(d, cmd(Source::Radiographer, Command::Exposure));
            let d = j(rng, 1800);
            b.after(d, ev(Source::Radiographer, EventKind::ExposureRequest));
            let d = j(rng, 500);
            let ok = !(retake && attempt == 0);
            b.after(d, ev(Source::Sensor, EventKind::ExposureComplete).with_valid(ok));
            if !ok {
                let d = j(rng, 200);
                b.after(d, cmd(Source::Radiographer, Command::Advance));
            }
        }
        let d = j(rng, 200);
        b.after(d, ev(Source::Patient, EventKind::Assent));
        let d = j(rng, 200);
        b.after(d, cmd(Source::Radiographer, Command::Release));
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nominal_shape() {
        let tl = nominal_timeline();
        assert_eq!(tl.len(), 1 + 3 * 12);
        assert!(tl.windows(2).all(|w| w[0].t <= w[1].t));
        assert_eq!(tl.last().unwrap().t, FIRST_VIEW_AT + 2 * VIEW_SPACING + 7700);
    }

    #[test]
    fn random_timelines_are_sorted_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        let x = random_timeline(&mut a, &Variation::default());
        assert_eq!(x, random_timeline(&mut b, &Variation::default()));
        assert!(x.windows(2).all(|w| w[0].t <= w[1].t));
    }
}
