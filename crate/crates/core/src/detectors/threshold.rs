//! Day-level statistical threshold detectors for the weeks-scale anomalies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::pipeline::{IntervalSet, LabelTrack};
use crate::time::SECONDS_PER_DAY;

pub const MIN_RUN_DAYS: usize = 7;

/// Grid for `c`: -1.00, -0.95, ..., 3.00.
pub fn c_grid() -> impl Iterator<Item = f64> {
    (0..=80).map(|k| (5 * k - 100) as f64 / 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDetector<T: Real> {
    pub mu: T,
    pub sigma: T,
    pub c: T,
    pub theta: T,
    pub direction: Direction,
    pub min_run_days: usize,
}

impl<T: Real> ThresholdDetector<T> {
    pub fn new(mu: T, sigma: T, c: T, direction: Direction) -> Self {
        let theta = match direction {
            Direction::Above => mu + c * sigma,
            Direction::Below => mu - c * sigma,
        };
        Self { mu, sigma, c, theta, direction, min_run_days: MIN_RUN_DAYS }
    }

    pub fn exceeds(&self, v: T) -> bool {
        match self.direction {
            Direction::Above => v > self.theta,
            Direction::Below => v < self.theta,
        }
    }

    /// Flags days that lie in a run of at least `min_run_days` consecutive
    /// exceeding days. Days in `exclude` break runs and are never flagged.
    pub fn classify(&self, values: &[T], exclude: Option<&[bool]>) -> Vec<bool> {
        let hit: Vec<bool> = values
            .iter()
            .enumerate()
            .map(|(d, &v)| self.exceeds(v) && !exclude.is_some_and(|e| e.get(d).copied().unwrap_or(false)))
            .collect();
        keep_long_runs(&hit, self.min_run_days)
    }
}

/// Clears every maximal run of `true` shorter than `min`.
pub fn keep_long_runs(bits: &[bool], min: usize) -> Vec<bool> {
    let mut out = bits.to_vec();
    let mut i = 0;
    while i < bits.len() {
        if !bits[i] {
            i += 1;
            continue;
        }
        let j = (i..bits.len()).find(|&j| !bits[j]).unwrap_or(bits.len());
        if j - i < min {
            out[i..j].iter_mut().for_each(|b| *b = false);
        }
        i = j;
    }
    out
}

/// F1 of a day-level prediction; 0 when there are no true positives.
pub fn f1(pred: &[bool], truth: &[bool]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

pub fn mean_sd<T: Real>(values: &[T]) -> (T, T) {
    let n = T::of(values.len() as f64);
    let mu = values.iter().copied().sum::<T>() / n;
    if values.len() < 2 {
        return (mu, T::zero());
    }
    let ss: T = values.iter().map(|&v| (v - mu) * (v - mu)).sum();
    (mu, (ss / (n - T::one())).sqrt())
}

/// Picks `c` on the grid maximizing F1 of the full run rule; the smallest
/// `c` wins ties.
pub fn fit_threshold<T: Real>(
    values: &[T],
    labels: &LabelTrack,
    direction: Direction,
    exclude: Option<&[bool]>,
) -> Result<ThresholdDetector<T>> {
    if labels.len != values.len() as u64 {
        return Err(Error::DimensionMismatch { expected: values.len(), got: labels.len as usize });
    }
    if labels.intervals.is_empty() {
        return Err(Error::NoPositives("the threshold detector".into()));
    }
    let truth = labels.to_bits();
    let (mu, sigma) = mean_sd(values);
    let mut best: Option<(f64, ThresholdDetector<T>)> = None;
    for c in c_grid() {
        let d = ThresholdDetector::new(mu, sigma, T::of(c), direction);
        let score = f1(&d.classify(values, exclude), &truth);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, d));
        }
    }
    Ok(best.expect("grid is non-empty").1)
}

/// Semi-bedridden first, then housebound on the remaining days.
pub fn detect_weeksscale<T: Real>(
    sleep: &[T],
    outings: &[T],
    d_sleep: &ThresholdDetector<T>,
    d_out: &ThresholdDetector<T>,
) -> (LabelTrack, LabelTrack) {
    let semi = d_sleep.classify(sleep, None);
    let house = d_out.classify(outings, Some(&semi));
    let track = |bits: &[bool]| LabelTrack { unit: SECONDS_PER_DAY, len: bits.len() as u64, intervals: IntervalSet::from_bits(bits) };
    (track(&semi), track(&house))
}
