//! Anomaly episode sampling and the behaviour changes each anomaly makes.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::plan::FloorPlan;
use crate::resident::activity::{nap_template, truncated_normal, FrequencyRule, StatModifiers, REST};
use crate::resident::mmse::MmseTrajectory;
use crate::resident::walk::{plan_walk, WalkSegment};
use crate::rng::SimRng;
use crate::time::{Ticks, DAYS_PER_MONTH, SECONDS_PER_DAY, TICKS_PER_DAY, TICKS_PER_MONTH, TICKS_PER_SECOND};

type P = Point<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnomalyKind {
    SemiBedridden,
    Housebound,
    Forgetting,
    Wandering,
    FallWalking,
    FallStanding,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 6] = [
        AnomalyKind::SemiBedridden,
        AnomalyKind::Housebound,
        AnomalyKind::Forgetting,
        AnomalyKind::Wandering,
        AnomalyKind::FallWalking,
        AnomalyKind::FallStanding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::SemiBedridden => "semi-bedridden",
            AnomalyKind::Housebound => "housebound",
            AnomalyKind::Forgetting => "forgetting",
            AnomalyKind::Wandering => "wandering",
            AnomalyKind::FallWalking => "fall-walking",
            AnomalyKind::FallStanding => "fall-standing",
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    /// Label granularity in seconds.
    pub fn unit_seconds(self) -> u64 {
        match self {
            AnomalyKind::SemiBedridden | AnomalyKind::Housebound => SECONDS_PER_DAY,
            AnomalyKind::Forgetting => 7200,
            _ => 1,
        }
    }

    pub fn is_weeks_scale(self) -> bool {
        matches!(self, AnomalyKind::SemiBedridden | AnomalyKind::Housebound)
    }

    /// Expected occurrences per month at MMSE `m`, never negative.
    pub fn monthly_rate(self, m: f64) -> f64 {
        let r = match self {
            AnomalyKind::SemiBedridden => 1.0 / 20.0,
            AnomalyKind::Housebound => 1.0 / 10.0,
            AnomalyKind::Wandering => -1.86 * m + 56.0,
            AnomalyKind::Forgetting => -m + 30.0,
            AnomalyKind::FallWalking | AnomalyKind::FallStanding => -m / 15.0 + 2.0,
        };
        r.max(0.0)
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        AnomalyKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown anomaly '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnomalyEpisode {
    pub kind: AnomalyKind,
    pub start: Ticks,
    pub end: Ticks,
}

impl AnomalyEpisode {
    pub fn duration(&self) -> Ticks {
        self.end - self.start
    }
}

/// A sampled occurrence before it is realised in the simulation.
/// `duration` is `None` for forgetting, whose length depends on when the
/// resident comes back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EpisodeDraw {
    pub kind: AnomalyKind,
    pub at: Ticks,
    pub duration: Option<Ticks>,
}

/// Shortest weeks-scale episode; shorter spells cannot satisfy the
/// seven-day detection rule.
pub const MIN_WEEKS_SCALE_DAYS: f64 = 7.0;
pub const FALL_IMMOBILE_MEAN_S: f64 = 30.0;
const FALL_IMMOBILE_MIN_S: f64 = 5.0;

fn weeks_scale_mean_days(kind: AnomalyKind) -> f64 {
    match kind {
        AnomalyKind::SemiBedridden => 30.0,
        _ => 14.0,
    }
}

/// Mean wandering length in minutes at MMSE `m`.
pub fn wandering_mean_min(m: f64) -> f64 {
    (-0.31 * m + 9.8).max(1.0)
}

/// Draws the occurrences of `kind` month by month.
pub fn sample_episodes(
    kind: AnomalyKind,
    mmse: &MmseTrajectory,
    horizon_months: usize,
    rate_scale: f64,
    rng: &mut SimRng,
) -> Result<Vec<EpisodeDraw>> {
    if horizon_months > mmse.values.len() {
        return Err(Error::InvalidParameter("horizon exceeds the MMSE trajectory".into()));
    }
    if !(rate_scale >= 0.0 && rate_scale.is_finite()) {
        return Err(Error::InvalidParameter("rate scale must be a non-negative number".into()));
    }
    let mut out = Vec::new();
    for month in 0..horizon_months {
        let m = mmse.at_month(month);
        let rate = kind.monthly_rate(m) * rate_scale;
        let n = if rate > 0.0 { Poisson::new(rate).expect("positive").sample(rng) as u64 } else { 0 };
        for _ in 0..n {
            let base = month as u64 * TICKS_PER_MONTH;
            let (at, duration) = match kind {
                AnomalyKind::SemiBedridden | AnomalyKind::Housebound => {
                    let day = rng.random_range(0..DAYS_PER_MONTH);
                    let extra = weeks_scale_mean_days(kind) - MIN_WEEKS_SCALE_DAYS;
                    let days = MIN_WEEKS_SCALE_DAYS + Exp::new(1.0 / extra).expect("positive").sample(rng);
                    (base + day * TICKS_PER_DAY, Some(days.round() as u64 * TICKS_PER_DAY))
                }
                AnomalyKind::Wandering => {
                    let mean = wandering_mean_min(m) * 600.0;
                    let d = truncated_normal(rng, mean, 0.2 * mean, 600.0);
                    (base + rng.random_range(0..TICKS_PER_MONTH), Some(d.round() as Ticks))
                }
                AnomalyKind::FallWalking | AnomalyKind::FallStanding => {
                    let mean = FALL_IMMOBILE_MEAN_S * 10.0;
                    let d = truncated_normal(rng, mean, 0.2 * mean, FALL_IMMOBILE_MIN_S * 10.0);
                    (base + rng.random_range(0..TICKS_PER_MONTH), Some(d.round() as Ticks))
                }
                AnomalyKind::Forgetting => (base + rng.random_range(0..TICKS_PER_MONTH), None),
            };
            out.push(EpisodeDraw { kind, at, duration });
        }
    }
    out.sort();
    Ok(out)
}

/// Turns weeks-scale draws into episodes clipped to the horizon. Later
/// spells overlapping an earlier one of the same kind are dropped, and so
/// are housebound spells overlapping a semi-bedridden one.
pub fn realize_weeks_scale(semi: &[EpisodeDraw], house: &[EpisodeDraw], horizon_days: u64) -> Vec<AnomalyEpisode> {
    let horizon = horizon_days * TICKS_PER_DAY;
    let clip = |draws: &[EpisodeDraw], kind| {
        let mut out: Vec<AnomalyEpisode> = Vec::new();
        for d in draws.iter().filter(|d| d.kind == kind && d.at < horizon) {
            let end = (d.at + d.duration.unwrap_or(TICKS_PER_DAY)).min(horizon);
            if out.last().is_none_or(|p| p.end <= d.at) {
                out.push(AnomalyEpisode { kind, start: d.at, end });
            }
        }
        out
    };
    let semi_eps = clip(semi, AnomalyKind::SemiBedridden);
    let house_eps: Vec<_> = clip(house, AnomalyKind::Housebound)
        .into_iter()
        .filter(|h| !semi_eps.iter().any(|s| s.start < h.end && h.start < s.end))
        .collect();
    let mut all = semi_eps;
    all.extend(house_eps);
    all.sort_by_key(|e| (e.start, e.kind));
    all
}

/// Routine changes caused by a weeks-scale episode.
pub fn stat_modifiers_for(ep: &AnomalyEpisode) -> Result<StatModifiers> {
    let (start_day, end_day) = (ep.start / TICKS_PER_DAY, ep.end.div_ceil(TICKS_PER_DAY));
    match ep.kind {
        AnomalyKind::SemiBedridden => Ok(StatModifiers {
            start_day,
            end_day,
            frequency: vec![("outing".into(), FrequencyRule::Set(1.0 / 7.0))],
            duration_shift_min: vec![(REST.into(), 30.0)],
            added: vec![nap_template()],
        }),
        AnomalyKind::Housebound => Ok(StatModifiers {
            start_day,
            end_day,
            frequency: vec![
                ("phone".into(), FrequencyRule::Set(1.0 / 3.0)),
                ("outing".into(), FrequencyRule::Set(1.0 / 14.0)),
            ],
            ..Default::default()
        }),
        k => Err(Error::InvalidParameter(format!("{k} does not change daily statistics"))),
    }
}

/// Legs of a wandering episode. The resident walks between randomly
/// chosen anchors, pausing under a second at each, until `duration` has
/// elapsed; the last leg is cut at the episode end.
pub fn inject_wandering(start: Ticks, duration: Ticks, from: P, plan: &FloorPlan, speed_cm_s: f64, rng: &mut SimRng) -> Vec<WalkSegment> {
    let anchors: Vec<P> = plan.anchors.values().copied().collect();
    let end = start + duration;
    let mut legs = Vec::new();
    let mut t = start;
    let mut pos = from;
    while t < end {
        let mut next = anchors[rng.random_range(0..anchors.len())];
        for _ in 0..64 {
            if next.distance(pos) >= 1.0 {
                break;
            }
            next = anchors[rng.random_range(0..anchors.len())];
        }
        let mut leg = plan_walk(pos, next, speed_cm_s, t);
        if leg.end >= end {
            leg = leg.truncated(end);
            legs.push(leg);
            break;
        }
        let dwell = rng.random_range(0..=TICKS_PER_SECOND);
        t = (leg.end + dwell).min(end);
        pos = leg.to;
        legs.push(leg);
    }
    legs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallSite {
    /// Uniformly inside the walk (fall while walking).
    Interior,
    /// Where the walk starts.
    Origin,
    /// Where the walk ends.
    Destination,
}

/// A walk split around a fall.
#[derive(Debug, Clone, PartialEq)]
pub struct FallPlan {
    pub before: WalkSegment,
    pub point: P,
    pub after: WalkSegment,
    pub episode: AnomalyEpisode,
}

pub fn inject_fall(kind: AnomalyKind, walk: &WalkSegment, immobile: Ticks, site: FallSite, rng: &mut SimRng) -> FallPlan {
    let at = match site {
        FallSite::Origin => walk.start,
        FallSite::Destination => walk.end,
        FallSite::Interior if walk.duration() >= 2 => rng.random_range(walk.start + 1..walk.end),
        FallSite::Interior => walk.start,
    };
    let before = walk.truncated(at);
    let point = before.to;
    let resume = at + immobile;
    let after = WalkSegment { from: point, to: walk.to, speed_cm_s: walk.speed_cm_s, start: resume, end: walk.end + immobile };
    FallPlan { before, point, after, episode: AnomalyEpisode { kind, start: at, end: resume } }
}

/// Distance within which a forgotten appliance is switched off.
pub const RETURN_RADIUS: f64 = 1.0;

/// Tracks a forgotten appliance until the resident comes back to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnWatch {
    pub sensor: usize,
    pub anchor: P,
    pub since: Ticks,
    left: bool,
}

impl ReturnWatch {
    pub fn new(sensor: usize, anchor: P, since: Ticks) -> Self {
        Self { sensor, anchor, since, left: false }
    }

    /// Returns the switch-off time once the resident, having left, is
    /// back within [`RETURN_RADIUS`].
    pub fn observe(&mut self, t: Ticks, pos: P) -> Option<Ticks> {
        let d = pos.distance(self.anchor);
        if d > RETURN_RADIUS {
            self.left = true;
            None
        } else if self.left {
            Some(t)
        } else {
            None
        }
    }
}
