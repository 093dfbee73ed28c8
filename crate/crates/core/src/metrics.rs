//! Pointwise and interval-level scores for label tracks.
//!
//! Intervals are 0-based closed `[s, e]`. A predicted interval is a hit
//! when it overlaps any true interval. The mean alarm length uses
//! `e - s`, so single-entry alarms count as length 0; `mal_inclusive`
//! reports `e - s + 1` alongside it.

use std::fmt;

use crate::detectors::denoise;
use crate::error::Result;
use crate::pipeline::{IntervalSet, LabelTrack};

/// Maximal runs of ones in `y`.
pub fn label_intervals(y: &[bool]) -> IntervalSet {
    IntervalSet::from_bits(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub raw_precision: Option<f64>,
    pub raw_recall: Option<f64>,
    pub interval_precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub far_per_day: f64,
    /// Track units.
    pub mal: Option<f64>,
    pub mal_inclusive: Option<f64>,
    pub denoise_threshold: u64,
    pub true_intervals: usize,
    pub predicted_intervals: usize,
}

/// Number of intervals in `a` overlapping at least one interval of `b`.
fn overlapped(a: &IntervalSet, b: &IntervalSet) -> usize {
    let b = b.as_slice();
    let mut j = 0;
    let mut hits = 0;
    for (s, e) in a.iter() {
        while j < b.len() && b[j].1 < s {
            j += 1;
        }
        if j < b.len() && b[j].0 <= e {
            hits += 1;
        }
    }
    hits
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Additive tallies behind a [`ScoreReport`], so results from several
/// runs can be pooled before taking ratios.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoreCounts {
    pub true_positive_units: u64,
    pub predicted_units: u64,
    pub true_units: u64,
    pub true_intervals: u64,
    pub detected_true_intervals: u64,
    pub predicted_intervals: u64,
    pub correct_predicted_intervals: u64,
    pub predicted_length_sum: u64,
    pub days: f64,
}

impl ScoreCounts {
    /// Tallies `pred` (already denoised) against `truth`.
    pub fn from_tracks(truth: &LabelTrack, pred: &LabelTrack, days: f64) -> Result<Self> {
        truth.check_compatible(pred)?;
        let (t, p) = (&truth.intervals, &pred.intervals);
        Ok(Self {
            true_positive_units: t.intersection_measure(p),
            predicted_units: p.measure(),
            true_units: t.measure(),
            true_intervals: t.len() as u64,
            detected_true_intervals: overlapped(t, p) as u64,
            predicted_intervals: p.len() as u64,
            correct_predicted_intervals: overlapped(p, t) as u64,
            predicted_length_sum: p.iter().map(|(s, e)| e - s).sum(),
            days,
        })
    }

    pub fn add(&mut self, o: &ScoreCounts) {
        self.true_positive_units += o.true_positive_units;
        self.predicted_units += o.predicted_units;
        self.true_units += o.true_units;
        self.true_intervals += o.true_intervals;
        self.detected_true_intervals += o.detected_true_intervals;
        self.predicted_intervals += o.predicted_intervals;
        self.correct_predicted_intervals += o.correct_predicted_intervals;
        self.predicted_length_sum += o.predicted_length_sum;
        self.days += o.days;
    }

    /// Interval metrics from these tallies. Raw unit-level precision and
    /// recall come from `raw` when given, which should hold the tallies of
    /// the same prediction before denoising.
    pub fn report_with_raw(&self, raw: Option<&ScoreCounts>, denoise_threshold: u64) -> ScoreReport {
        let mut r = self.report(denoise_threshold);
        if let Some(raw) = raw {
            r.raw_precision = ratio(raw.true_positive_units, raw.predicted_units);
            r.raw_recall = ratio(raw.true_positive_units, raw.true_units);
        }
        r
    }

    pub fn report(&self, denoise_threshold: u64) -> ScoreReport {
        let n_hat = self.predicted_intervals;
        let false_alarms = n_hat - self.correct_predicted_intervals;
        ScoreReport {
            raw_precision: ratio(self.true_positive_units, self.predicted_units),
            raw_recall: ratio(self.true_positive_units, self.true_units),
            interval_precision: ratio(self.correct_predicted_intervals, n_hat),
            sensitivity: ratio(self.detected_true_intervals, self.true_intervals),
            far_per_day: if self.days > 0.0 { false_alarms as f64 / self.days } else { 0.0 },
            mal: ratio(self.predicted_length_sum, n_hat),
            mal_inclusive: ratio(self.predicted_length_sum + n_hat, n_hat),
            denoise_threshold,
            true_intervals: self.true_intervals as usize,
            predicted_intervals: n_hat as usize,
        }
    }
}

/// Scores `pred` against `truth` over `days` calendar days. Interval
/// metrics see `pred` after removing runs shorter than
/// `denoise_threshold` units; raw precision and recall see it as given.
pub fn score(truth: &LabelTrack, pred: &LabelTrack, days: f64, denoise_threshold: u64) -> Result<ScoreReport> {
    let raw = ScoreCounts::from_tracks(truth, pred, days)?;
    let clean = ScoreCounts::from_tracks(truth, &denoise(pred, denoise_threshold), days)?;
    Ok(clean.report_with_raw(Some(&raw), denoise_threshold))
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "precision {} recall {} sensitivity {} FAR/day {:.4} MAL {} (inclusive {}) interval precision {}",
            fmt_opt(self.raw_precision),
            fmt_opt(self.raw_recall),
            fmt_opt(self.sensitivity),
            self.far_per_day,
            fmt_opt(self.mal),
            fmt_opt(self.mal_inclusive),
            fmt_opt(self.interval_precision)
        )
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pairwise overlap scan over every (true, predicted) interval pair.
    pub fn oracle(truth: &[(u64, u64)], pred: &[(u64, u64)], days: f64) -> (Option<f64>, f64, Option<f64>, Option<f64>) {
        let ov = |a: (u64, u64), b: (u64, u64)| a.0 <= b.1 && b.0 <= a.1;
        let sens = (!truth.is_empty()).then(|| truth.iter().filter(|&&a| pred.iter().any(|&b| ov(a, b))).count() as f64 / truth.len() as f64);
        let false_alarms = pred.iter().filter(|&&b| !truth.iter().any(|&a| ov(a, b))).count();
        let mal = (!pred.is_empty()).then(|| pred.iter().map(|&(s, e)| (e - s) as f64).sum::<f64>() / pred.len() as f64);
        let ip = (!pred.is_empty()).then(|| pred.iter().filter(|&&b| truth.iter().any(|&a| ov(a, b))).count() as f64 / pred.len() as f64);
        (sens, false_alarms as f64 / days, mal, ip)
    }

    fn track(bits: &[bool]) -> LabelTrack {
        LabelTrack::from_bits(1, bits)
    }

    #[test]
    fn worked_example() {
        let y = [false, true, true, true, false, false, true, true, false];
        assert_eq!(label_intervals(&y).as_slice(), &[(1, 3), (6, 7)]);
        assert!(label_intervals(&[false; 5]).is_empty());
    }

    #[test]
    fn perfect_prediction() {
        let y = [false, true, true, false, true];
        let r = score(&track(&y), &track(&y), 1.0, 0).unwrap();
        assert_eq!((r.sensitivity, r.far_per_day, r.raw_precision, r.raw_recall), (Some(1.0), 0.0, Some(1.0), Some(1.0)));
    }

    #[test]
    fn hand_enumerated_case() {
        let mut t = vec![false; 50];
        let mut p = vec![false; 50];
        t[10..=20].iter_mut().for_each(|b| *b = true);
        p[18..=25].iter_mut().for_each(|b| *b = true);
        p[40..=41].iter_mut().for_each(|b| *b = true);
        let r = score(&track(&t), &track(&p), 1.0, 0).unwrap();
        assert_eq!(r.sensitivity, Some(1.0));
        assert_eq!(r.far_per_day, 1.0);
        assert_eq!(r.interval_precision, Some(0.5));
        assert_eq!(r.mal, Some(4.0));
        assert_eq!(r.mal_inclusive, Some(5.0));
        assert_eq!(r.raw_precision, Some(3.0 / 10.0));
        let d = score(&track(&t), &track(&p), 1.0, 3).unwrap();
        assert_eq!((d.far_per_day, d.predicted_intervals), (0.0, 1));
        assert_eq!(d.raw_precision, Some(3.0 / 10.0));
    }

    #[test]
    fn empty_conventions() {
        let z = track(&[false; 10]);
        let r = score(&z, &z, 1.0, 0).unwrap();
        assert_eq!((r.sensitivity, r.mal, r.far_per_day), (None, None, 0.0));
        assert!(score(&z, &track(&[false; 9]), 1.0, 0).is_err());
    }

    #[test]
    fn denoise_applied_before_scoring() {
        let t = track(&[true, true, false, false, false, false]);
        let p = track(&[false, false, false, false, true, false]);
        let r = score(&t, &p, 1.0, 2).unwrap();
        assert_eq!((r.far_per_day, r.predicted_intervals), (0.0, 0));
    }

    proptest! {
        #[test]
        fn matches_pairwise_oracle(t in prop::collection::vec(any::<bool>(), 1..120), p in prop::collection::vec(any::<bool>(), 1..120)) {
            let n = t.len().min(p.len());
            let (tt, pp) = (track(&t[..n]), track(&p[..n]));
            let r = score(&tt, &pp, 2.0, 0).unwrap();
            let (s, far, mal, ip) = oracle(tt.intervals.as_slice(), pp.intervals.as_slice(), 2.0);
            prop_assert_eq!(r.sensitivity, s);
            prop_assert_eq!(r.far_per_day, far);
            prop_assert_eq!(r.mal, mal);
            prop_assert_eq!(r.interval_precision, ip);
        }

        #[test]
        fn extending_predictions_is_monotone(t in prop::collection::vec(any::<bool>(), 10..80), p in prop::collection::vec(any::<bool>(), 10..80), grow in 1u64..4) {
            let n = t.len().min(p.len()) as u64;
            let tt = track(&t[..n as usize]);
            let pp = track(&p[..n as usize]);
            let wider = LabelTrack {
                unit: 1,
                len: n,
                intervals: IntervalSet::from_unsorted(pp.intervals.iter().map(|(s, e)| (s.saturating_sub(grow), (e + grow).min(n - 1))).collect()),
            };
            let a = score(&tt, &pp, 1.0, 0).unwrap();
            let b = score(&tt, &wider, 1.0, 0).unwrap();
            if let (Some(x), Some(y)) = (a.sensitivity, b.sensitivity) {
                prop_assert!(y >= x);
            }
            prop_assert!(b.far_per_day <= a.far_per_day);
            if let (Some(x), Some(y)) = (a.mal, b.mal) {
                prop_assert!(y >= x);
            }
            // Merging can only remove false alarms, never add them.
            if let (Some(x), Some(y)) = (a.interval_precision, b.interval_precision) {
                prop_assert!(y >= x || b.predicted_intervals < a.predicted_intervals);
            }
        }

        #[test]
        fn self_score_is_exact(t in prop::collection::vec(any::<bool>(), 1..100)) {
            prop_assume!(t.iter().any(|&b| b));
            let r = score(&track(&t), &track(&t), 1.0, 0).unwrap();
            prop_assert_eq!((r.raw_precision, r.raw_recall), (Some(1.0), Some(1.0)));
        }
    }
}
