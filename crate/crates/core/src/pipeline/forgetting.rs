//! Two features per 2-hour window for spotting appliances left on.
//!
//! `f1` is the summed ON time of all cost sensors inside the window.
//! `f2` is the largest distance between a cost sensor and any other
//! sensor that was on at the same time, with both clipped to the window.
//! Intervals are half-open, so a sensor switching on exactly when another
//! switches off does not count as co-active.

use crate::plan::SensorLayout;
use crate::sensors::SensorEvent;
use crate::time::{Ticks, TICKS_PER_SECOND};

pub const WINDOW_SECONDS: u64 = 7_200;
const WINDOW: Ticks = WINDOW_SECONDS * TICKS_PER_SECOND;

#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingFeatures {
    /// Seconds of cost-sensor activity per window.
    pub f1: Vec<f64>,
    /// Meters.
    pub f2: Vec<f64>,
}

impl ForgettingFeatures {
    pub fn len(&self) -> usize {
        self.f1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f1.is_empty()
    }

    pub fn row(&self, w: usize) -> [f64; 2] {
        [self.f1[w], self.f2[w]]
    }
}

struct Acc {
    f1: Vec<Ticks>,
    f2: Vec<f64>,
    horizon: Ticks,
}

impl Acc {
    fn windows(&self, a: Ticks, b: Ticks) -> std::ops::Range<usize> {
        let b = b.min(self.horizon);
        if b <= a {
            return 0..0;
        }
        (a / WINDOW) as usize..(b.div_ceil(WINDOW) as usize).min(self.f1.len())
    }

    fn on_time(&mut self, a: Ticks, b: Ticks) {
        for w in self.windows(a, b) {
            let lo = a.max(w as u64 * WINDOW);
            let hi = b.min((w as u64 + 1) * WINDOW);
            self.f1[w] += hi - lo;
        }
    }

    fn pair(&mut self, a: Ticks, b: Ticks, d: f64) {
        for w in self.windows(a, b) {
            if d > self.f2[w] {
                self.f2[w] = d;
            }
        }
    }
}

/// Features for windows covering `0..horizon` ticks; sensors still on at
/// the end count as on until `horizon`.
pub fn forgetting_features(events: &[SensorEvent], layout: &SensorLayout, horizon: Ticks) -> ForgettingFeatures {
    let n = horizon.div_ceil(WINDOW) as usize;
    let mut acc = Acc { f1: vec![0; n], f2: vec![0.0; n], horizon };
    let dist = layout.distance_matrix();
    let cost: Vec<bool> = (0..layout.len()).map(|i| layout.cost_sensor_ids.contains(&i)).collect();
    let mut since: Vec<Option<Ticks>> = vec![None; layout.len()];
    let mut active: Vec<usize> = Vec::new();

    let close = |x: usize, t: Ticks, since: &mut Vec<Option<Ticks>>, active: &mut Vec<usize>, acc: &mut Acc| {
        let Some(start) = since[x].take() else { return };
        active.retain(|&y| y != x);
        if cost[x] {
            acc.on_time(start, t);
        }
        for &y in active.iter() {
            if cost[x] || cost[y] {
                let from = start.max(since[y].unwrap_or(start));
                acc.pair(from, t, dist[x][y]);
            }
        }
    };

    // OFF before ON within equal times: events are sorted with OFF first.
    for e in events {
        let x = e.sensor as usize;
        if x >= layout.len() {
            continue;
        }
        if e.state {
            if since[x].is_none() {
                since[x] = Some(e.time);
                active.push(x);
            }
        } else {
            close(x, e.time, &mut since, &mut active, &mut acc);
        }
    }
    while let Some(&x) = active.first() {
        close(x, horizon, &mut since, &mut active, &mut acc);
    }
    ForgettingFeatures { f1: acc.f1.iter().map(|&t| t as f64 / TICKS_PER_SECOND as f64).collect(), f2: acc.f2 }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::pipeline::matrix::tests::random_events;
    use crate::plan::default_plan;

    /// Tick-by-tick replay.
    pub fn naive_forgetting(events: &[SensorEvent], layout: &SensorLayout, horizon: Ticks) -> ForgettingFeatures {
        let n = horizon.div_ceil(WINDOW) as usize;
        let mut f1 = vec![0u64; n];
        let mut f2 = vec![0.0f64; n];
        let mut on = vec![false; layout.len()];
        let mut i = 0;
        for t in 0..horizon {
            while i < events.len() && events[i].time <= t {
                on[events[i].sensor as usize] = events[i].state;
                i += 1;
            }
            let w = (t / WINDOW) as usize;
            for &c in &layout.cost_sensor_ids {
                if !on[c] {
                    continue;
                }
                f1[w] += 1;
                for s in 0..layout.len() {
                    if s != c && on[s] {
                        let d = crate::plan::sensor_distance(layout, c, s).unwrap();
                        f2[w] = f2[w].max(d);
                    }
                }
            }
        }
        ForgettingFeatures { f1: f1.iter().map(|&t| t as f64 / 10.0).collect(), f2 }
    }

    #[test]
    fn quiet_window_is_zero() {
        let (_, layout) = default_plan();
        let ev = [SensorEvent::on(100, 5), SensorEvent::off(400, 5)];
        let f = forgetting_features(&ev, &layout, 2 * WINDOW);
        assert_eq!(f.row(0), [0.0, 0.0]);
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn stove_left_on_while_in_bed() {
        let (_, layout) = default_plan();
        let stove = layout.cost_sensor_for("stove").unwrap();
        let mut ev = vec![SensorEvent::on(WINDOW, stove), SensorEvent::on(WINDOW + 5, 35)];
        ev.push(SensorEvent::off(2 * WINDOW, stove));
        ev.push(SensorEvent::off(2 * WINDOW + 50, 35));
        ev.sort();
        let f = forgetting_features(&ev, &layout, 3 * WINDOW);
        assert_eq!(f.f1[1], 7200.0);
        let d = crate::plan::sensor_distance(&layout, stove, 35).unwrap();
        assert!((f.f2[1] - d).abs() < 1e-12);
        assert!(d > 6.0);
        assert_eq!(f.row(2), [0.0, 0.0]);
    }

    #[test]
    fn cooking_nearby_stays_close() {
        let (_, layout) = default_plan();
        let stove = layout.cost_sensor_for("stove").unwrap();
        let near: Vec<usize> = layout
            .motion_ids()
            .into_iter()
            .filter(|&i| crate::plan::sensor_distance(&layout, stove, i).unwrap() < 2.0)
            .collect();
        assert!(!near.is_empty());
        let mut ev = vec![SensorEvent::on(1000, stove), SensorEvent::off(20_000, stove)];
        for (k, &s) in near.iter().enumerate() {
            let t = 2000 + 1000 * k as u64;
            ev.push(SensorEvent::on(t, s));
            ev.push(SensorEvent::off(t + 30, s));
        }
        ev.sort();
        let f = forgetting_features(&ev, &layout, WINDOW);
        assert!(f.f2[0] <= 2.0 && f.f2[0] > 0.0);
        assert_eq!(f.f1[0], 1900.0);
    }

    #[test]
    fn touching_intervals_are_not_coactive() {
        let (_, layout) = default_plan();
        let stove = layout.cost_sensor_for("stove").unwrap();
        let mut ev = vec![SensorEvent::on(100, 0), SensorEvent::off(200, 0), SensorEvent::on(200, stove), SensorEvent::off(300, stove)];
        ev.sort();
        let f = forgetting_features(&ev, &layout, WINDOW);
        assert_eq!(f.f2[0], 0.0);
    }

    #[test]
    fn random_traces_match_replay() {
        let (_, layout) = default_plan();
        for seed in 0..10 {
            let ev = random_events(seed, layout.len(), 4000, 30_000);
            let h = 300_000;
            let f = forgetting_features(&ev, &layout, h);
            let g = naive_forgetting(&ev, &layout, h);
            assert_eq!(f.f1, g.f1);
            for (a, b) in f.f2.iter().zip(&g.f2) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
