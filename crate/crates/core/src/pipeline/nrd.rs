//! Nonresponse duration: per motion sensor, seconds since it was last
//! activated, counted only while it belongs to the most recent set of
//! firing motion sensors. Once another firing second excludes it, its
//! value is zero.
//!
//! Infrared and door sensors restart their count on every firing second.
//! A pressure sensor only restarts when it was not already among the
//! sensors of the previous firing second, so lying still on a mat keeps
//! counting.

use super::matrix::{Columns, SensorSet};
use crate::error::{Error, Result};
use crate::plan::{SensorKind, SensorLayout};

/// Counts are capped at one day.
pub const NRD_CAP: u32 = 86_400;

/// One restart of a sensor's count: zero on `first..=last`, then
/// `j - last` for `last < j < stop`, then zero until the next span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NrdSpan {
    pub first: u64,
    pub last: u64,
    pub stop: u64,
}

impl NrdSpan {
    pub fn value(&self, j: u64) -> u32 {
        if j >= self.stop {
            0
        } else {
            j.saturating_sub(self.last).min(NRD_CAP as u64) as u32
        }
    }
}

/// `S_M x T` nonresponse durations stored as per-sensor restart spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NrdMatrix {
    pub motion_ids: Vec<usize>,
    pub seconds: u64,
    /// Per local sensor, spans sorted by `first`, with `stop` no later
    /// than the next span's `first`.
    pub spans: Vec<Vec<NrdSpan>>,
}

impl NrdMatrix {
    pub fn features(&self) -> usize {
        self.motion_ids.len()
    }

    pub fn local_index(&self, sensor: usize) -> Option<usize> {
        self.motion_ids.iter().position(|&i| i == sensor)
    }

    pub fn value(&self, local: usize, j: u64) -> u32 {
        let spans = &self.spans[local];
        let i = spans.partition_point(|s| s.first <= j);
        if i == 0 {
            0
        } else {
            spans[i - 1].value(j)
        }
    }

    /// Rows for seconds `from..to`, computed with forward cursors.
    pub fn rows(&self, from: u64, to: u64) -> NrdRows<'_> {
        let cursor = self.spans.iter().map(|v| v.partition_point(|s| s.first <= from)).collect();
        NrdRows { m: self, j: from, to: to.min(self.seconds), cursor, buf: vec![0; self.features()] }
    }
}

/// Iterator over `(second, row)`; the row buffer is reused.
pub struct NrdRows<'a> {
    m: &'a NrdMatrix,
    j: u64,
    to: u64,
    cursor: Vec<usize>,
    buf: Vec<u32>,
}

impl NrdRows<'_> {
    pub fn next_row(&mut self) -> Option<(u64, &[u32])> {
        if self.j >= self.to {
            return None;
        }
        let j = self.j;
        for (local, spans) in self.m.spans.iter().enumerate() {
            let c = &mut self.cursor[local];
            while *c < spans.len() && spans[*c].first <= j {
                *c += 1;
            }
            self.buf[local] = if *c == 0 { 0 } else { spans[*c - 1].value(j) };
        }
        self.j += 1;
        Some((j, &self.buf))
    }
}

const OPEN: u64 = u64::MAX;

/// Builds the nonresponse durations of every motion sensor in `layout`.
pub fn nonresponse_duration(matrix: &(impl Columns + ?Sized), layout: &SensorLayout) -> Result<NrdMatrix> {
    if matrix.sensors() > layout.len() {
        return Err(Error::DimensionMismatch { expected: layout.len(), got: matrix.sensors() });
    }
    let ids = layout.motion_ids();
    let motion = SensorSet::from_ids(ids.iter().copied());
    let sticky: Vec<bool> = ids.iter().map(|&i| layout.sensors[i].kind == SensorKind::Pressure).collect();
    let mut spans: Vec<Vec<NrdSpan>> = vec![Vec::new(); ids.len()];
    let mut latest = SensorSet::EMPTY;
    for (a, b, mask) in matrix.segments_from(0) {
        let fired = mask.intersection(motion);
        if fired.is_empty() || b <= a {
            continue;
        }
        for (local, &id) in ids.iter().enumerate() {
            let v = &mut spans[local];
            if !fired.contains(id) {
                if latest.contains(id) {
                    if let Some(s) = v.last_mut() {
                        s.stop = a;
                    }
                }
                continue;
            }
            let span = if !sticky[local] {
                NrdSpan { first: a, last: b - 1, stop: OPEN }
            } else if !latest.contains(id) {
                NrdSpan { first: a, last: a, stop: OPEN }
            } else {
                continue;
            };
            match v.last_mut() {
                Some(l) if l.stop == OPEN && l.last + 1 == a => l.last = span.last,
                Some(l) => {
                    l.stop = l.stop.min(a);
                    v.push(span);
                }
                None => v.push(span),
            }
        }
        latest = fired;
    }
    let seconds = matrix.len();
    for v in &mut spans {
        if let Some(l) = v.last_mut() {
            if l.stop == OPEN {
                l.stop = seconds;
            }
        }
    }
    Ok(NrdMatrix { motion_ids: ids, seconds, spans })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::matrix::tests::random_events;
    use crate::pipeline::matrix::{binarize, DataMatrix, Run};
    use crate::plan::default_plan;

    /// Second-by-second replay of the rule.
    pub(crate) fn naive_nrd(cols: &[SensorSet], layout: &SensorLayout) -> Vec<Vec<u32>> {
        let ids = layout.motion_ids();
        let mut last = vec![0u64; ids.len()];
        let mut latest = SensorSet::EMPTY;
        let mut out = Vec::with_capacity(cols.len());
        for (j, col) in cols.iter().enumerate() {
            let j = j as u64;
            let fired: Vec<usize> = ids.iter().copied().filter(|&id| col.contains(id)).collect();
            if !fired.is_empty() {
                for (l, &id) in ids.iter().enumerate() {
                    let pressure = layout.sensors[id].kind == SensorKind::Pressure;
                    if fired.contains(&id) && !(pressure && latest.contains(id)) {
                        last[l] = j;
                    }
                }
                latest = SensorSet::from_ids(fired);
            }
            out.push(
                ids.iter()
                    .enumerate()
                    .map(|(l, &id)| if latest.contains(id) { (j - last[l]).min(NRD_CAP as u64) as u32 } else { 0 })
                    .collect(),
            );
        }
        out
    }

    fn check(m: &DataMatrix, layout: &SensorLayout) {
        let cols: Vec<SensorSet> = (0..m.seconds).map(|k| m.column(k)).collect();
        let want = naive_nrd(&cols, layout);
        let nrd = nonresponse_duration(m, layout).unwrap();
        let mut rows = nrd.rows(0, m.seconds);
        while let Some((j, row)) = rows.next_row() {
            assert_eq!(row, &want[j as usize][..], "second {j}");
        }
        for j in (0..m.seconds).step_by(97) {
            for l in 0..nrd.features() {
                assert_eq!(nrd.value(l, j), want[j as usize][l]);
            }
        }
    }

    #[test]
    fn counts_after_single_firing() {
        let (_, layout) = default_plan();
        let m = DataMatrix { sensors: layout.len(), seconds: 100, runs: vec![Run { start: 10, end: 11, mask: SensorSet::from_ids([5]) }] };
        let nrd = nonresponse_duration(&m, &layout).unwrap();
        let l = nrd.local_index(5).unwrap();
        assert_eq!(nrd.value(l, 9), 0);
        for k in 0..80 {
            assert_eq!(nrd.value(l, 10 + k), k as u32);
        }
        check(&m, &layout);
    }

    #[test]
    fn another_sensor_ends_the_count() {
        let (_, layout) = default_plan();
        let runs = vec![
            Run { start: 10, end: 11, mask: SensorSet::from_ids([5]) },
            Run { start: 30, end: 31, mask: SensorSet::from_ids([6]) },
        ];
        let m = DataMatrix { sensors: layout.len(), seconds: 100, runs };
        let nrd = nonresponse_duration(&m, &layout).unwrap();
        let (a, b) = (nrd.local_index(5).unwrap(), nrd.local_index(6).unwrap());
        assert_eq!((nrd.value(a, 29), nrd.value(b, 29)), (19, 0));
        assert_eq!((nrd.value(a, 30), nrd.value(b, 30)), (0, 0));
        assert_eq!((nrd.value(a, 60), nrd.value(b, 60)), (0, 30));
        check(&m, &layout);
    }

    #[test]
    fn pressure_keeps_counting_while_held() {
        let (_, layout) = default_plan();
        let m = DataMatrix { sensors: layout.len(), seconds: 300, runs: vec![Run { start: 50, end: 150, mask: SensorSet::from_ids([34]) }] };
        let nrd = nonresponse_duration(&m, &layout).unwrap();
        let l = nrd.local_index(34).unwrap();
        assert_eq!(nrd.value(l, 149), 99);
        assert_eq!(nrd.value(l, 150), 100);
        check(&m, &layout);
        // An infrared sensor held for the same span stays at zero.
        let m = DataMatrix { sensors: layout.len(), seconds: 300, runs: vec![Run { start: 50, end: 150, mask: SensorSet::from_ids([7]) }] };
        let nrd = nonresponse_duration(&m, &layout).unwrap();
        assert_eq!(nrd.value(nrd.local_index(7).unwrap(), 149), 0);
    }

    #[test]
    fn pressure_restarts_after_another_sensor() {
        let (_, layout) = default_plan();
        let runs = vec![
            Run { start: 10, end: 20, mask: SensorSet::from_ids([34]) },
            Run { start: 20, end: 21, mask: SensorSet::from_ids([34, 3]) },
            Run { start: 21, end: 22, mask: SensorSet::from_ids([3]) },
            Run { start: 30, end: 31, mask: SensorSet::from_ids([34]) },
        ];
        let m = DataMatrix { sensors: layout.len(), seconds: 60, runs };
        let nrd = nonresponse_duration(&m, &layout).unwrap();
        let l = nrd.local_index(34).unwrap();
        assert_eq!(nrd.value(l, 20), 10);
        assert_eq!(nrd.value(l, 25), 0);
        assert_eq!(nrd.value(l, 30), 0);
        assert_eq!(nrd.value(l, 40), 10);
        check(&m, &layout);
    }

    #[test]
    fn cap_applies() {
        let (_, layout) = default_plan();
        let m = DataMatrix { sensors: layout.len(), seconds: 200_000, runs: vec![Run { start: 0, end: 1, mask: SensorSet::from_ids([3]) }] };
        let nrd = nonresponse_duration(&m, &layout).unwrap();
        let l = nrd.local_index(3).unwrap();
        assert_eq!(nrd.value(l, 150_000), NRD_CAP);
        assert_eq!(nrd.value(0, 150_000), 0);
    }

    #[test]
    fn random_traces_match_replay() {
        let (_, layout) = default_plan();
        for seed in 0..20 {
            let ev = random_events(seed, layout.len(), 3000, 5000);
            let m = binarize(&ev, layout.len(), 5000).unwrap();
            check(&m, &layout);
        }
    }
}
