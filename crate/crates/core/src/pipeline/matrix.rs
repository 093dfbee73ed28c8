//! Per-second binary activation matrix stored as runs of identical
//! columns.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::sensors::SensorEvent;
use crate::time::{Ticks, TICKS_PER_SECOND};

/// Set of sensor ids below 128.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SensorSet(pub u128);

impl SensorSet {
    pub const EMPTY: SensorSet = SensorSet(0);

    pub fn contains(self, id: usize) -> bool {
        id < 128 && self.0 >> id & 1 == 1
    }

    pub fn insert(&mut self, id: usize) {
        self.0 |= 1 << id;
    }

    pub fn remove(&mut self, id: usize) {
        self.0 &= !(1 << id);
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn union(self, o: SensorSet) -> SensorSet {
        SensorSet(self.0 | o.0)
    }

    pub fn intersection(self, o: SensorSet) -> SensorSet {
        SensorSet(self.0 & o.0)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    pub fn from_ids(ids: impl IntoIterator<Item = usize>) -> Self {
        let mut s = SensorSet::EMPTY;
        for i in ids {
            s.insert(i);
        }
        s
    }
}

/// Column-major access in constant segments `(start, end, mask)`, end
/// exclusive, covering `from..len` without gaps.
pub trait Columns {
    fn sensors(&self) -> usize;
    fn len(&self) -> u64;
    fn segments_from(&self, from: u64) -> Box<dyn Iterator<Item = (u64, u64, SensorSet)> + '_>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A maximal run of identical non-empty columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub start: u64,
    pub end: u64,
    pub mask: SensorSet,
}

/// Column `k` (0-based) covers the half-open second `(k, k+1]`; a sensor
/// is set there when it was on at any instant of that second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataMatrix {
    pub sensors: usize,
    pub seconds: u64,
    pub runs: Vec<Run>,
}

impl DataMatrix {
    pub fn column(&self, k: u64) -> SensorSet {
        let i = self.runs.partition_point(|r| r.end <= k);
        match self.runs.get(i) {
            Some(r) if r.start <= k => r.mask,
            _ => SensorSet::EMPTY,
        }
    }

    pub fn get(&self, sensor: usize, k: u64) -> bool {
        self.column(k).contains(sensor)
    }

    /// Number of active sensors per column, for small matrices.
    pub fn column_sums(&self) -> Vec<u32> {
        let mut out = vec![0; self.seconds as usize];
        for r in &self.runs {
            for k in r.start..r.end {
                out[k as usize] = r.mask.len();
            }
        }
        out
    }

    /// Keeps only the given sensors.
    pub fn restrict(&self, keep: SensorSet) -> DataMatrix {
        let mut runs: Vec<Run> = Vec::new();
        for r in &self.runs {
            let mask = r.mask.intersection(keep);
            if mask.is_empty() {
                continue;
            }
            match runs.last_mut() {
                Some(l) if l.end == r.start && l.mask == mask => l.end = r.end,
                _ => runs.push(Run { mask, ..*r }),
            }
        }
        DataMatrix { sensors: self.sensors, seconds: self.seconds, runs }
    }
}

impl Columns for DataMatrix {
    fn sensors(&self) -> usize {
        self.sensors
    }

    fn len(&self) -> u64 {
        self.seconds
    }

    fn segments_from(&self, from: u64) -> Box<dyn Iterator<Item = (u64, u64, SensorSet)> + '_> {
        let first = self.runs.partition_point(|r| r.end <= from);
        let mut i = first;
        let mut at = from;
        let len = self.seconds;
        Box::new(std::iter::from_fn(move || {
            if at >= len {
                return None;
            }
            let seg = match self.runs.get(i) {
                Some(r) if r.start <= at => {
                    i += 1;
                    (at, r.end, r.mask)
                }
                Some(r) => (at, r.start, SensorSet::EMPTY),
                None => (at, len, SensorSet::EMPTY),
            };
            at = seg.1;
            Some(seg)
        }))
    }
}

impl Columns for [SensorSet] {
    fn sensors(&self) -> usize {
        self.iter().map(|s| 128 - s.0.leading_zeros() as usize).max().unwrap_or(0)
    }

    fn len(&self) -> u64 {
        <[SensorSet]>::len(self) as u64
    }

    fn segments_from(&self, from: u64) -> Box<dyn Iterator<Item = (u64, u64, SensorSet)> + '_> {
        Box::new((from as usize..<[SensorSet]>::len(self)).map(move |k| (k as u64, k as u64 + 1, self[k])))
    }
}

/// First column touched by an instant.
pub fn column_of(t: Ticks) -> u64 {
    t.div_ceil(TICKS_PER_SECOND).saturating_sub(1)
}

/// Incremental builder fed with time-ordered events.
#[derive(Debug)]
pub struct MaskStream {
    seconds: u64,
    sensors: usize,
    count: Vec<u32>,
    mask: SensorSet,
    run_start: u64,
    pending: BinaryHeap<Reverse<(u64, u16)>>,
    on: Vec<bool>,
    last: Option<SensorEvent>,
    runs: Vec<Run>,
}

impl MaskStream {
    pub fn new(sensors: usize, seconds: u64) -> Self {
        Self {
            seconds,
            sensors,
            count: vec![0; sensors],
            mask: SensorSet::EMPTY,
            run_start: 0,
            pending: BinaryHeap::new(),
            on: vec![false; sensors],
            last: None,
            runs: Vec::new(),
        }
    }

    fn change(&mut self, col: u64, id: usize, set: bool) {
        let mut next = self.mask;
        if set {
            next.insert(id)
        } else {
            next.remove(id)
        }
        if next == self.mask {
            return;
        }
        if col > self.run_start && !self.mask.is_empty() {
            let run = Run { start: self.run_start, end: col, mask: self.mask };
            match self.runs.last_mut() {
                Some(l) if l.end == run.start && l.mask == run.mask => l.end = run.end,
                _ => self.runs.push(run),
            }
        }
        self.mask = next;
        self.run_start = col;
    }

    fn advance(&mut self, col: u64) {
        while let Some(&Reverse((c, id))) = self.pending.peek() {
            if c > col {
                break;
            }
            self.pending.pop();
            let id = id as usize;
            self.count[id] -= 1;
            if self.count[id] == 0 {
                self.change(c, id, false);
            }
        }
    }

    pub fn push(&mut self, e: SensorEvent) -> Result<()> {
        let id = e.sensor as usize;
        if id >= self.sensors {
            return Err(Error::UnknownSensor(id));
        }
        if self.last.is_some_and(|l| e < l) {
            return Err(Error::InvalidParameter(format!("events out of order at time {}", e.time)));
        }
        let col = column_of(e.time);
        if e.time.div_ceil(TICKS_PER_SECOND) > self.seconds {
            return Err(Error::EventBeyondHorizon { time: e.time, horizon: self.seconds });
        }
        self.last = Some(e);
        self.advance(col);
        if e.state {
            if self.on[id] {
                return Err(Error::InvalidParameter(format!("sensor {id} switched on twice at {}", e.time)));
            }
            self.on[id] = true;
            self.count[id] += 1;
            if self.count[id] == 1 {
                self.change(col, id, true);
            }
            // Held until the matching OFF; see `finish` for open ones.
        } else {
            if !self.on[id] {
                return Err(Error::InvalidParameter(format!("sensor {id} switched off while off at {}", e.time)));
            }
            self.on[id] = false;
            self.pending.push(Reverse((col + 1, id as u16)));
        }
        Ok(())
    }

    /// Sensors still on are treated as on until the last column.
    pub fn finish(mut self) -> DataMatrix {
        for id in 0..self.sensors {
            if self.on[id] {
                self.pending.push(Reverse((self.seconds, id as u16)));
            }
        }
        self.advance(u64::MAX);
        let end = self.seconds;
        self.change_to_end(end);
        DataMatrix { sensors: self.sensors, seconds: self.seconds, runs: self.runs }
    }

    fn change_to_end(&mut self, end: u64) {
        if !self.mask.is_empty() && end > self.run_start {
            let run = Run { start: self.run_start, end, mask: self.mask };
            match self.runs.last_mut() {
                Some(l) if l.end == run.start && l.mask == run.mask => l.end = run.end,
                _ => self.runs.push(run),
            }
        }
    }
}

/// Builds the `S x T` matrix from sorted events.
pub fn binarize(events: &[SensorEvent], sensors: usize, seconds: u64) -> Result<DataMatrix> {
    if sensors > super::MAX_SENSORS {
        return Err(Error::InvalidParameter("at most 128 sensors are supported".into()));
    }
    let mut m = MaskStream::new(sensors, seconds);
    for &e in events {
        m.push(e)?;
    }
    Ok(m.finish())
}
