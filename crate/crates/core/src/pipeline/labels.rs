//! Label tracks: binary vectors at an anomaly-specific unit, stored as
//! their maximal runs of ones.

use crate::anomalies::AnomalyEpisode;
use crate::error::{Error, Result};
use crate::time::{Ticks, TICKS_PER_SECOND};

/// Sorted, disjoint, non-adjacent closed intervals `[start, end]` of
/// 0-based positions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntervalSet {
    intervals: Vec<(u64, u64)>,
}

impl IntervalSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Normalizes arbitrary closed intervals: sorts, then merges any that
    /// overlap or touch.
    pub fn from_unsorted(mut v: Vec<(u64, u64)>) -> Self {
        v.retain(|&(s, e)| s <= e);
        v.sort_unstable();
        let mut out = IntervalSet::new();
        for (s, e) in v {
            out.push(s, e);
        }
        out
    }

    /// Appends `[s, e]`; must not start before the last interval does.
    pub fn push(&mut self, s: u64, e: u64) {
        debug_assert!(s <= e);
        match self.intervals.last_mut() {
            Some(last) if s <= last.1.saturating_add(1) => {
                debug_assert!(s >= last.0);
                last.1 = last.1.max(e);
            }
            _ => self.intervals.push((s, e)),
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut out = IntervalSet::new();
        let mut start = None;
        for (i, &b) in bits.iter().enumerate() {
            match (b, start) {
                (true, None) => start = Some(i as u64),
                (false, Some(s)) => {
                    out.intervals.push((s, i as u64 - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.intervals.push((s, bits.len() as u64 - 1));
        }
        out
    }

    pub fn to_bits(&self, len: u64) -> Vec<bool> {
        let mut v = vec![false; len as usize];
        for &(s, e) in &self.intervals {
            for k in s..=e.min(len.saturating_sub(1)) {
                v[k as usize] = true;
            }
        }
        v
    }

    pub fn as_slice(&self) -> &[(u64, u64)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.intervals.iter().copied()
    }

    /// Number of covered positions.
    pub fn measure(&self) -> u64 {
        self.intervals.iter().map(|&(s, e)| e - s + 1).sum()
    }

    pub fn contains(&self, k: u64) -> bool {
        let i = self.intervals.partition_point(|&(_, e)| e < k);
        self.intervals.get(i).is_some_and(|&(s, _)| s <= k)
    }

    /// Positions covered by both sets.
    pub fn intersection_measure(&self, other: &IntervalSet) -> u64 {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j, mut total) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if lo <= hi {
                total += hi - lo + 1;
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        total
    }
}

/// Binary label vector of length `len` at `unit` seconds per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTrack {
    pub unit: u64,
    pub len: u64,
    pub intervals: IntervalSet,
}

impl LabelTrack {
    pub fn zeros(unit: u64, len: u64) -> Self {
        Self { unit, len, intervals: IntervalSet::new() }
    }

    pub fn from_bits(unit: u64, bits: &[bool]) -> Self {
        Self { unit, len: bits.len() as u64, intervals: IntervalSet::from_bits(bits) }
    }

    pub fn to_bits(&self) -> Vec<bool> {
        self.intervals.to_bits(self.len)
    }

    pub fn get(&self, k: u64) -> bool {
        self.intervals.contains(k)
    }

    pub fn positives(&self) -> u64 {
        self.intervals.measure()
    }

    pub fn check_compatible(&self, other: &LabelTrack) -> Result<()> {
        if self.unit != other.unit || self.len != other.len {
            return Err(Error::TrackMismatch(format!(
                "unit {} len {} vs unit {} len {}",
                self.unit, self.len, other.unit, other.len
            )));
        }
        Ok(())
    }
}

/// Entry `k` is set when some episode `(start, end]` overlaps the
/// interval `(kU, (k+1)U]`; a zero-length episode marks the entry holding
/// its instant.
pub fn summarize_labels<'a>(
    episodes: impl IntoIterator<Item = &'a AnomalyEpisode>,
    unit: u64,
    horizon_seconds: u64,
) -> Result<LabelTrack> {
    if unit == 0 || !horizon_seconds.is_multiple_of(unit) {
        return Err(Error::InvalidParameter(format!("unit {unit} does not divide horizon {horizon_seconds}")));
    }
    let len = horizon_seconds / unit;
    let u: Ticks = unit * TICKS_PER_SECOND;
    let mut spans = Vec::new();
    for ep in episodes {
        if len == 0 {
            break;
        }
        let first = if ep.end > ep.start { ep.start / u } else { ep.start.div_ceil(u).saturating_sub(1) };
        let last = ep.end.div_ceil(u).saturating_sub(1).max(first);
        if first >= len {
            continue;
        }
        spans.push((first, last.min(len - 1)));
    }
    Ok(LabelTrack { unit, len, intervals: IntervalSet::from_unsorted(spans) })
}
