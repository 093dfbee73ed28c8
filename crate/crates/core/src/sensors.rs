//! Sensor engine: turns the resident's position stream, outings and
//! appliance windows into binary sensor events.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{disc_hits_rect, Point, Rect};
use crate::plan::{SensorGeometry, SensorKind, SensorLayout};
use crate::time::{ceil_to_second, format_secs, parse_secs, Ticks, TICKS_PER_SECOND};

type P = Point<f64>;

pub const UPRIGHT_RADIUS: f64 = 0.25;
pub const FALLEN_RADIUS: f64 = 0.75;
/// How long the door contact stays closed per crossing.
pub const DOOR_PULSE: Ticks = 2 * TICKS_PER_SECOND;

/// Field order gives the canonical `(time, sensor)` ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SensorEvent {
    pub time: Ticks,
    pub sensor: u16,
    pub state: bool,
}

impl SensorEvent {
    pub fn on(time: Ticks, sensor: usize) -> Self {
        Self { time, sensor: sensor as u16, state: true }
    }

    pub fn off(time: Ticks, sensor: usize) -> Self {
        Self { time, sensor: sensor as u16, state: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionSample {
    pub time: Ticks,
    pub position: P,
    pub moving: bool,
    pub body_radius: f64,
}

impl PositionSample {
    pub fn upright(time: Ticks, position: P, moving: bool) -> Self {
        Self { time, position, moving, body_radius: UPRIGHT_RADIUS }
    }
}

/// Streaming transducer. Samples are piecewise constant: each one holds
/// until the next. Events come out through [`SensorEngine::drain`] in
/// `(time, sensor)` order.
#[derive(Debug)]
pub struct SensorEngine {
    infrared: Vec<(usize, P, f64)>,
    mats: Vec<(usize, Rect<f64>)>,
    door: usize,
    on: Vec<bool>,
    last_change: Vec<Option<Ticks>>,
    open_window: Vec<Option<(Ticks, Ticks)>>,
    pending: BinaryHeap<Reverse<SensorEvent>>,
    horizon: Ticks,
    suppressed: Vec<bool>,
    emitted: u64,
}

impl SensorEngine {
    /// Events after `horizon` are clipped (OFF) or dropped (ON).
    pub fn new(layout: &SensorLayout, horizon: Ticks) -> Self {
        let mut infrared = Vec::new();
        let mut mats = Vec::new();
        for s in &layout.sensors {
            match (s.kind, s.geometry) {
                (SensorKind::InfraredMotion, SensorGeometry::Circle { radius }) => infrared.push((s.id, s.position, radius)),
                (SensorKind::Pressure, _) => mats.extend(s.mat().map(|r| (s.id, r))),
                _ => {}
            }
        }
        let n = layout.len();
        Self {
            infrared,
            mats,
            door: layout.door_sensor_id,
            on: vec![false; n],
            last_change: vec![None; n],
            open_window: vec![None; n],
            pending: BinaryHeap::new(),
            horizon,
            suppressed: vec![false; n],
            emitted: 0,
        }
    }

    fn emit(&mut self, mut ev: SensorEvent) {
        let s = ev.sensor as usize;
        if ev.state {
            if ev.time >= self.horizon {
                self.suppressed[s] = true;
                return;
            }
        } else {
            if self.suppressed[s] {
                self.suppressed[s] = false;
                return;
            }
            ev.time = ev.time.min(self.horizon);
        }
        self.pending.push(Reverse(ev));
    }

    /// Body sensors; a change at the tick of the previous one is pushed
    /// back a tick so that every pulse has positive length.
    fn set(&mut self, t: Ticks, id: usize, state: bool) {
        if self.on[id] != state {
            self.on[id] = state;
            let t = self.last_change[id].map_or(t, |l| t.max(l + 1));
            self.last_change[id] = Some(t);
            self.emit(SensorEvent { time: t, sensor: id as u16, state });
        }
    }

    fn update_body(&mut self, t: Ticks, body: Option<(P, bool, f64)>) {
        for i in 0..self.infrared.len() {
            let (id, c, r) = self.infrared[i];
            let hit = body.is_some_and(|(p, moving, br)| moving && p.distance(c) <= r + br);
            self.set(t, id, hit);
        }
        for i in 0..self.mats.len() {
            let (id, rect) = self.mats[i];
            let hit = body.is_some_and(|(p, _, br)| disc_hits_rect(p, br, &rect));
            self.set(t, id, hit);
        }
    }

    pub fn push_sample(&mut self, s: &PositionSample) {
        self.update_body(s.time, Some((s.position, s.moving, s.body_radius)));
    }

    /// The resident has left the home.
    pub fn push_absent(&mut self, t: Ticks) {
        self.update_body(t, None);
    }

    /// The entrance door opens at `t`.
    pub fn push_door(&mut self, t: Ticks) {
        if self.on[self.door] {
            return;
        }
        self.emit(SensorEvent::on(t, self.door));
        self.emit(SensorEvent::off(t + DOOR_PULSE, self.door));
    }

    /// A cost sensor is on during `[start, end]`, sampled once a second.
    /// Windows must arrive in start order; overlapping ones merge.
    pub fn push_appliance(&mut self, sensor: usize, start: Ticks, end: Ticks) {
        let a = ceil_to_second(start);
        let b = if end == Ticks::MAX { end } else { ceil_to_second(end).max(a + TICKS_PER_SECOND) };
        match self.open_window[sensor] {
            Some((oa, ob)) if a <= ob => self.open_window[sensor] = Some((oa, ob.max(b))),
            prev => {
                if let Some((_, ob)) = prev {
                    self.emit(SensorEvent::off(ob, sensor));
                }
                self.emit(SensorEvent::on(a, sensor));
                self.open_window[sensor] = Some((a, b));
            }
        }
    }

    /// Sets the end of a window opened with an unbounded end.
    pub fn close_appliance(&mut self, sensor: usize, end: Ticks) {
        if let Some((oa, _)) = self.open_window[sensor] {
            self.open_window[sensor] = Some((oa, ceil_to_second(end).max(oa + TICKS_PER_SECOND)));
        }
    }

    /// Releases every event strictly before `now`. All later input must
    /// be at or after `now`.
    pub fn drain(&mut self, now: Ticks, sink: &mut impl FnMut(SensorEvent)) {
        for s in 0..self.open_window.len() {
            if let Some((_, ob)) = self.open_window[s] {
                if ob < now {
                    self.open_window[s] = None;
                    self.emit(SensorEvent::off(ob, s));
                }
            }
        }
        while let Some(Reverse(ev)) = self.pending.peek().copied() {
            if ev.time >= now {
                break;
            }
            self.pending.pop();
            self.emitted += 1;
            sink(ev);
        }
    }

    /// Switches everything off at `t` and flushes.
    pub fn finish(mut self, t: Ticks, sink: &mut impl FnMut(SensorEvent)) -> u64 {
        self.update_body(t, None);
        self.drain(Ticks::MAX, sink);
        self.emitted
    }
}

/// Input for the batch form of the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EngineInput {
    Sample(PositionSample),
    /// Leave at the first time, come back at the second.
    Outing(Ticks, Ticks),
    Appliance(usize, Ticks, Ticks),
}

impl EngineInput {
    fn time(&self) -> Ticks {
        match *self {
            EngineInput::Sample(s) => s.time,
            EngineInput::Outing(a, _) | EngineInput::Appliance(_, a, _) => a,
        }
    }
}

/// Batch wrapper: sorts the inputs and runs them through one engine.
/// Position samples after an outing starts are ignored until it ends.
pub fn run_sensors(
    positions: &[PositionSample],
    appliance_windows: &[(usize, Ticks, Ticks)],
    outing_windows: &[(Ticks, Ticks)],
    layout: &SensorLayout,
    horizon: Ticks,
) -> Vec<SensorEvent> {
    let mut inputs: Vec<EngineInput> = positions.iter().copied().map(EngineInput::Sample).collect();
    inputs.extend(outing_windows.iter().map(|&(a, b)| EngineInput::Outing(a, b)));
    inputs.extend(appliance_windows.iter().map(|&(s, a, b)| EngineInput::Appliance(s, a, b)));
    inputs.sort_by_key(EngineInput::time);
    let mut engine = SensorEngine::new(layout, horizon);
    let mut out = Vec::new();
    let mut away_until: Option<Ticks> = None;
    let mut returns: Vec<Ticks> = Vec::new();
    for inp in inputs {
        let t = inp.time();
        returns.retain(|&r| {
            if r <= t {
                engine.push_door(r);
                false
            } else {
                true
            }
        });
        engine.drain(t, &mut |e| out.push(e));
        match inp {
            EngineInput::Sample(s) => {
                if away_until.is_some_and(|u| s.time < u) {
                    continue;
                }
                engine.push_sample(&s);
            }
            EngineInput::Outing(a, b) => {
                engine.push_absent(a);
                engine.push_door(a);
                away_until = Some(b);
                returns.push(b);
            }
            EngineInput::Appliance(s, a, b) => engine.push_appliance(s, a, b),
        }
    }
    for r in returns {
        engine.push_door(r);
    }
    let end = positions.last().map_or(0, |p| p.time).max(outing_windows.iter().map(|o| o.1 + DOOR_PULSE).max().unwrap_or(0));
    engine.finish(end.min(horizon), &mut |e| out.push(e));
    out
}

/// Writes the canonical `time_s,sensor_id,state` CSV.
pub fn write_events<'a, W: Write>(events: impl IntoIterator<Item = &'a SensorEvent>, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["time_s", "sensor_id", "state"])?;
    for e in events {
        w.write_record([format_secs(e.time), e.sensor.to_string(), u8::from(e.state).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Streaming reader over an event CSV; the header row is optional.
pub struct EventReader<R: Read> {
    inner: csv::Reader<R>,
    record: csv::StringRecord,
    first: bool,
}

impl<R: Read> EventReader<R> {
    pub fn new(source: R) -> Self {
        let inner = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(source);
        Self { inner, record: csv::StringRecord::new(), first: true }
    }
}

fn parse_event(r: &csv::StringRecord) -> std::result::Result<SensorEvent, String> {
    if r.len() != 3 {
        return Err(format!("expected 3 fields, found {}", r.len()));
    }
    let time = parse_secs(&r[0]).ok_or_else(|| format!("bad time '{}'", &r[0]))?;
    let sensor: u16 = r[1].parse().map_err(|_| format!("bad sensor id '{}'", &r[1]))?;
    let state = match &r[2] {
        "1" => true,
        "0" => false,
        s => return Err(format!("bad state '{s}'")),
    };
    Ok(SensorEvent { time, sensor, state })
}

impl<R: Read> Iterator for EventReader<R> {
    type Item = Result<SensorEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.inner.read_record(&mut self.record) {
                Ok(false) => return None,
                Ok(true) => {}
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    return Some(Err(Error::Parse { line, message: e.to_string() }));
                }
            }
            let line = self.record.position().map_or(0, |p| p.line());
            if std::mem::take(&mut self.first) && self.record.get(0) == Some("time_s") {
                continue;
            }
            return Some(parse_event(&self.record).map_err(|message| Error::Parse { line, message }));
        }
    }
}

pub fn read_events<R: Read>(source: R) -> Result<Vec<SensorEvent>> {
    EventReader::new(source).collect()
}

/// Checks ordering and per-sensor ON/OFF alternation starting with ON.
pub fn check_stream(events: &[SensorEvent], sensors: usize) -> std::result::Result<(), String> {
    let mut state = vec![false; sensors];
    for (i, w) in events.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(format!("event {} out of order", i + 1));
        }
    }
    for (i, e) in events.iter().enumerate() {
        let s = e.sensor as usize;
        if s >= sensors {
            return Err(format!("event {i}: unknown sensor {s}"));
        }
        if state[s] == e.state {
            return Err(format!("event {i}: sensor {s} does not alternate"));
        }
        state[s] = e.state;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::default_plan;
    use crate::resident::walk::{plan_walk, DEFAULT_SPEED_CM_S};
    use crate::time::clock;
    use proptest::prelude::*;

    fn walk_samples(from: P, to: P, depart: Ticks) -> Vec<PositionSample> {
        let w = plan_walk(from, to, DEFAULT_SPEED_CM_S, depart);
        w.samples().map(|(t, p)| PositionSample::upright(t, p, t < w.end)).collect()
    }

    #[test]
    fn stationary_resident_is_silent() {
        let (_, layout) = default_plan();
        let s = [PositionSample::upright(0, P::new(2.0, 6.0), false), PositionSample::upright(5000, P::new(2.0, 6.0), false)];
        let ev = run_sensors(&s, &[], &[], &layout, 100_000);
        assert!(ev.is_empty(), "{ev:?}");
    }

    #[test]
    fn straight_walk_through_one_circle() {
        let (_, layout) = default_plan();
        // Along x = 2.5 between two grid columns; passes only sensors
        // within 0.75 m of the line.
        let from = P::new(2.5, 2.4);
        let to = P::new(2.5, 3.6);
        let samples = walk_samples(from, to, 100);
        let ev = run_sensors(&samples, &[], &[], &layout, 100_000);
        for s in &layout.sensors {
            let on: Vec<_> = ev.iter().filter(|e| e.sensor as usize == s.id).collect();
            let expected_hit = samples.iter().any(|p| p.moving && p.position.distance(s.position) <= 0.75);
            if s.kind == SensorKind::InfraredMotion && expected_hit {
                assert_eq!(on.len(), 2, "sensor {}", s.id);
                assert!(on[0].state && !on[1].state);
                let first = samples.iter().find(|p| p.moving && p.position.distance(s.position) <= 0.75).unwrap().time;
                assert_eq!(on[0].time, first);
            } else {
                assert!(on.is_empty(), "sensor {}", s.id);
            }
        }
        assert!(ev.iter().any(|e| e.sensor == 9));
    }

    #[test]
    fn outing_silences_motion() {
        let (_, layout) = default_plan();
        let entrance = P::new(2.0, 0.5);
        let mut samples = walk_samples(P::new(2.0, 5.0), entrance, 0);
        let leave = samples.last().unwrap().time + 10;
        let back = leave + 24_000;
        samples.push(PositionSample::upright(leave + 50, P::new(3.0, 3.0), true));
        samples.extend(walk_samples(entrance, P::new(2.0, 5.0), back));
        let ev = run_sensors(&samples, &[], &[(leave, back)], &layout, 1_000_000);
        let inside: Vec<_> = ev.iter().filter(|e| e.time > leave + DOOR_PULSE && e.time < back).collect();
        assert!(inside.is_empty(), "{inside:?}");
        let door: Vec<_> = ev.iter().filter(|e| e.sensor == 40).collect();
        assert_eq!(door.len(), 4);
        assert_eq!((door[0].time, door[2].time), (leave, back));
        check_stream(&ev, layout.len()).unwrap();
    }

    #[test]
    fn appliance_windows_on_second_grid_and_merged() {
        let (_, layout) = default_plan();
        let ev = run_sensors(&[], &[(39, 15, 203), (39, 190, 400), (39, 900, 1000)], &[], &layout, 100_000);
        let times: Vec<_> = ev.iter().map(|e| (e.time, e.state)).collect();
        assert_eq!(times, vec![(20, true), (400, false), (900, true), (1000, false)]);
    }

    #[test]
    fn fallen_body_on_mats() {
        let (plan, layout) = default_plan();
        let bed = plan.anchor("bed").unwrap();
        let s = [
            PositionSample { time: 0, position: bed, moving: false, body_radius: FALLEN_RADIUS },
            PositionSample::upright(300, bed, false),
        ];
        let ev = run_sensors(&s, &[], &[], &layout, 100_000);
        let ids: Vec<_> = ev.iter().map(|e| (e.time, e.sensor, e.state)).collect();
        assert_eq!(ids, vec![(0, 34, true), (0, 35, true), (300, 34, false), (300, 35, false)]);
    }

    #[test]
    fn csv_paper_example_and_errors() {
        let ev = read_events("941130.1,10,1\n".as_bytes()).unwrap();
        assert_eq!(ev, vec![SensorEvent::on(9_411_301, 10)]);
        let t = clock(10, 13, 45, 301);
        let ev = read_events(format!("time_s,sensor_id,state\n{},10,1\n", format_secs(t)).as_bytes()).unwrap();
        assert_eq!(ev[0].time, 9_135_301);
        match read_events("x,y,z\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match read_events("time_s,sensor_id,state\n1.0,2,1\n2.0,2\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let mut ev = Vec::new();
        let mut t = 0;
        for i in 0..1_000_000u64 {
            t += 1 + (i * 7919) % 37;
            let s = (i % 41) as usize;
            ev.push(SensorEvent { time: t, sensor: s as u16, state: i % 2 == 0 });
        }
        let mut a = Vec::new();
        write_events(&ev, &mut a).unwrap();
        let back = read_events(a.as_slice()).unwrap();
        assert_eq!(back, ev);
        let mut b = Vec::new();
        write_events(&back, &mut b).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_paths_alternate(pts in prop::collection::vec((0.0..5.0f64, 0.0..12.0f64, any::<bool>()), 2..12)) {
            let (_, layout) = default_plan();
            let mut samples = Vec::new();
            let mut t = 0;
            for w in pts.windows(2) {
                let (a, b) = (P::new(w[0].0, w[0].1), P::new(w[1].0, w[1].1));
                let mut s = walk_samples(a, b, t);
                if w[1].2 {
                    s.last_mut().unwrap().body_radius = FALLEN_RADIUS;
                }
                t = s.last().unwrap().time + 30;
                samples.extend(s);
            }
            let ev = run_sensors(&samples, &[(36, 0, t / 2)], &[], &layout, 1_000_000);
            prop_assert!(check_stream(&ev, layout.len()).is_ok());
            // Infrared only fires while the body is moving within range.
            for e in ev.iter().filter(|e| e.state && (e.sensor as usize) < 34) {
                let s = samples.iter().rev().find(|s| s.time <= e.time).unwrap();
                prop_assert!(s.moving);
                prop_assert!(s.position.distance(layout.sensors[e.sensor as usize].position) <= 0.5 + s.body_radius + 1e-12);
            }
        }
    }
}
