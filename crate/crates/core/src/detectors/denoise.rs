//! Removal of short predicted runs.

use crate::pipeline::{IntervalSet, LabelTrack};

/// Drops every run of ones shorter than `threshold` entries; a threshold
/// of zero or one leaves the track unchanged.
pub fn denoise(track: &LabelTrack, threshold: u64) -> LabelTrack {
    let mut kept = IntervalSet::new();
    for (s, e) in track.intervals.iter() {
        if e - s + 1 >= threshold {
            kept.push(s, e);
        }
    }
    LabelTrack { unit: track.unit, len: track.len, intervals: kept }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn runs(lens: &[u64]) -> LabelTrack {
        let mut set = IntervalSet::new();
        let mut at = 0;
        for &l in lens {
            set.push(at, at + l - 1);
            at += l + 5;
        }
        LabelTrack { unit: 1, len: at, intervals: set }
    }

    #[test]
    fn identity_at_zero() {
        let t = runs(&[3, 28, 144]);
        assert_eq!(denoise(&t, 0), t);
    }

    #[test]
    fn keeps_runs_of_exact_threshold() {
        let t = runs(&[3, 28, 144]);
        let lens: Vec<u64> = denoise(&t, 28).intervals.iter().map(|(s, e)| e - s + 1).collect();
        assert_eq!(lens, vec![28, 144]);
    }

    proptest! {
        #[test]
        fn idempotent_and_shrinking(bits in prop::collection::vec(any::<bool>(), 0..300), k in 0u64..12) {
            let t = LabelTrack::from_bits(1, &bits);
            let d = denoise(&t, k);
            prop_assert_eq!(denoise(&d, k), d.clone());
            prop_assert!(d.intervals.len() <= t.intervals.len());
            for (s, e) in d.intervals.iter() {
                prop_assert!(t.intervals.iter().any(|(a, b)| a == s && b == e));
            }
        }
    }
}
