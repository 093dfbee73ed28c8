use crate::geometry::Point;
use crate::time::Ticks;

type P = Point<f64>;

pub const DEFAULT_SPEED_CM_S: f64 = 68.75;
/// Walks end within this distance of the destination.
pub const ARRIVAL_TOLERANCE: f64 = 0.30;

/// Straight-line walk sampled every tick (10 Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSegment {
    pub from: P,
    pub to: P,
    pub speed_cm_s: f64,
    pub start: Ticks,
    pub end: Ticks,
}

impl WalkSegment {
    pub fn length(&self) -> f64 {
        self.from.distance(self.to)
    }

    pub fn duration(&self) -> Ticks {
        self.end - self.start
    }

    /// Position at tick `t`, clamped to the segment.
    pub fn position_at(&self, t: Ticks) -> P {
        if self.end <= self.start || t >= self.end {
            return self.to;
        }
        if t <= self.start {
            return self.from;
        }
        let f = (t - self.start) as f64 / (self.end - self.start) as f64;
        self.from.lerp(self.to, f)
    }

    /// `(time, position)` at every tick from start to end inclusive.
    pub fn samples(&self) -> impl Iterator<Item = (Ticks, P)> + '_ {
        (self.start..=self.end).map(move |t| (t, self.position_at(t)))
    }

    /// The walk cut short at `t`.
    pub fn truncated(&self, t: Ticks) -> WalkSegment {
        let t = t.clamp(self.start, self.end);
        WalkSegment { to: self.position_at(t), end: t, ..self.clone() }
    }
}

/// Walk duration in whole ticks, rounded up.
pub fn walk_ticks(from: P, to: P, speed_cm_s: f64) -> Ticks {
    let secs = from.distance(to) / (speed_cm_s / 100.0);
    (secs * 10.0 - 1e-9).ceil().max(0.0) as Ticks
}

pub fn plan_walk(from: P, to: P, speed_cm_s: f64, depart: Ticks) -> WalkSegment {
    assert!(speed_cm_s > 0.0, "walking speed must be positive");
    WalkSegment { from, to, speed_cm_s, start: depart, end: depart + walk_ticks(from, to, speed_cm_s) }
}
