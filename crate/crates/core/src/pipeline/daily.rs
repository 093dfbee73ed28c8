//! Daily sleep hours and outing counts estimated from raw events.

use crate::plan::SensorLayout;
use crate::sensors::SensorEvent;
use crate::time::{day_of, Ticks, TICKS_PER_SECOND};

/// Gaps must exceed one minute.
const MIN_GAP: Ticks = 60 * TICKS_PER_SECOND;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DailySeries {
    pub sleep_hours: Vec<f64>,
    pub outings: Vec<u32>,
}

impl DailySeries {
    pub fn estimate(events: &[SensorEvent], layout: &SensorLayout, days: u64) -> Self {
        Self { sleep_hours: estimate_sleep(events, layout, days), outings: estimate_outings(events, layout, days) }
    }

    pub fn outings_f64(&self) -> Vec<f64> {
        self.outings.iter().map(|&o| o as f64).collect()
    }
}

/// Generic gap scan: between consecutive activations of `marker`
/// sensors, a gap longer than a minute with no other motion sensor
/// switching on is handed to `hit` with its start and length.
fn quiet_gaps(
    events: &[SensorEvent],
    layout: &SensorLayout,
    marker: impl Fn(usize) -> bool,
    mut hit: impl FnMut(Ticks, Ticks),
) {
    let motion: Vec<bool> = layout.sensors.iter().map(|s| s.kind.is_motion()).collect();
    let mut last: Option<Ticks> = None;
    let mut dirty = false;
    for e in events.iter().filter(|e| e.state) {
        let id = e.sensor as usize;
        if marker(id) {
            if let Some(a) = last {
                if !dirty && e.time - a > MIN_GAP {
                    hit(a, e.time - a);
                }
            }
            last = Some(e.time);
            dirty = false;
        } else if motion.get(id).copied().unwrap_or(false) {
            dirty = true;
        }
    }
}

/// Hours of sleep per day: stretches between consecutive bed-sensor
/// activations, attributed to the day the stretch starts.
pub fn estimate_sleep(events: &[SensorEvent], layout: &SensorLayout, days: u64) -> Vec<f64> {
    let mut out = vec![0.0; days as usize];
    quiet_gaps(events, layout, |id| layout.is_bed_sensor(id), |a, len| {
        if let Some(d) = out.get_mut(day_of(a) as usize) {
            *d += len as f64 / (3600 * TICKS_PER_SECOND) as f64;
        }
    });
    out
}

/// Outings per day: quiet stretches between consecutive door activations.
pub fn estimate_outings(events: &[SensorEvent], layout: &SensorLayout, days: u64) -> Vec<u32> {
    let mut out = vec![0; days as usize];
    let door = layout.door_sensor_id;
    quiet_gaps(events, layout, |id| id == door, |a, _| {
        if let Some(d) = out.get_mut(day_of(a) as usize) {
            *d += 1;
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::default_plan;
    use crate::time::clock;

    fn pulse(t: Ticks, id: usize) -> [SensorEvent; 2] {
        [SensorEvent::on(t, id), SensorEvent::off(t + 20, id)]
    }

    #[test]
    fn one_quiet_night() {
        let (_, layout) = default_plan();
        let mut ev: Vec<_> = pulse(clock(0, 23, 0, 0), 23).into_iter().chain(pulse(clock(1, 7, 0, 0), 23)).collect();
        ev.sort();
        let s = estimate_sleep(&ev, &layout, 2);
        assert!((s[0] - 8.0).abs() < 1e-9);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn toilet_visit_breaks_the_stretch() {
        let (_, layout) = default_plan();
        let mut ev: Vec<_> = pulse(clock(0, 23, 0, 0), 23).into_iter().chain(pulse(clock(1, 7, 0, 0), 23)).collect();
        ev.extend(pulse(clock(1, 3, 0, 0), 2));
        ev.sort();
        assert_eq!(estimate_sleep(&ev, &layout, 2), vec![0.0, 0.0]);
    }

    #[test]
    fn short_gaps_ignored() {
        let (_, layout) = default_plan();
        let mut ev: Vec<_> = pulse(1000, 34).into_iter().chain(pulse(1500, 35)).collect();
        ev.sort();
        assert_eq!(estimate_sleep(&ev, &layout, 1), vec![0.0]);
    }

    #[test]
    fn outings_counted_only_when_silent() {
        let (_, layout) = default_plan();
        let door = layout.door_sensor_id;
        let mut ev: Vec<_> = pulse(clock(0, 10, 0, 0), door).into_iter().chain(pulse(clock(0, 11, 0, 0), door)).collect();
        ev.sort();
        assert_eq!(estimate_outings(&ev, &layout, 1), vec![1]);
        ev.extend(pulse(clock(0, 10, 20, 0), 8));
        ev.sort();
        assert_eq!(estimate_outings(&ev, &layout, 1), vec![0]);
    }
}
