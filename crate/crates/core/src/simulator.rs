//! Day-by-day simulation of one resident, with anomaly injection.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::anomalies::{
    inject_fall, inject_wandering, realize_weeks_scale, sample_episodes, stat_modifiers_for, AnomalyEpisode, AnomalyKind,
    EpisodeDraw, FallSite, ReturnWatch,
};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::plan::{validate, FloorPlan, SensorLayout};
use crate::resident::activity::{missing_anchors, schedule_day, ActivityInstance, ActivityTemplate, StatModifiers};
use crate::resident::mmse::{simulate_mmse, MmseParams, MmseTrajectory};
use crate::resident::walk::{plan_walk, walk_ticks, WalkSegment, ARRIVAL_TOLERANCE};
use crate::rng::{substream, SimRng, Stream};
use crate::sensors::{PositionSample, SensorEngine, SensorEvent, FALLEN_RADIUS, UPRIGHT_RADIUS};
use crate::time::{Ticks, DAYS_PER_MONTH, TICKS_PER_DAY, TICKS_PER_SECOND};

type P = Point<f64>;

/// Radius of the small repositioning moves made during an activity.
pub const FIDGET_RADIUS: f64 = 0.5;
/// Walks shorter than this never carry a fall while walking.
const MIN_FALL_WALK: Ticks = 2 * TICKS_PER_SECOND;
/// Time reserved after a wandering episode to walk back.
const WANDER_MARGIN: Ticks = 60 * TICKS_PER_SECOND;
/// Wake-up time on the first simulated morning.
const FIRST_WAKE: Ticks = 7 * 3600 * TICKS_PER_SECOND;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalySettings {
    pub semi_bedridden: bool,
    pub housebound: bool,
    pub forgetting: bool,
    pub wandering: bool,
    pub fall_walking: bool,
    pub fall_standing: bool,
    /// Multiplier on every monthly occurrence rate.
    pub rate_scale: f64,
}

impl Default for AnomalySettings {
    fn default() -> Self {
        Self {
            semi_bedridden: true,
            housebound: true,
            forgetting: true,
            wandering: true,
            fall_walking: true,
            fall_standing: true,
            rate_scale: 1.0,
        }
    }
}

impl AnomalySettings {
    pub fn none() -> Self {
        Self {
            semi_bedridden: false,
            housebound: false,
            forgetting: false,
            wandering: false,
            fall_walking: false,
            fall_standing: false,
            rate_scale: 1.0,
        }
    }

    pub fn enabled(&self, k: AnomalyKind) -> bool {
        match k {
            AnomalyKind::SemiBedridden => self.semi_bedridden,
            AnomalyKind::Housebound => self.housebound,
            AnomalyKind::Forgetting => self.forgetting,
            AnomalyKind::Wandering => self.wandering,
            AnomalyKind::FallWalking => self.fall_walking,
            AnomalyKind::FallStanding => self.fall_standing,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub horizon_days: u64,
    pub speed_cm_s: f64,
    pub plan: FloorPlan,
    pub layout: SensorLayout,
    pub templates: Vec<ActivityTemplate>,
    pub mmse: MmseParams,
    pub anomalies: AnomalySettings,
}

impl SimConfig {
    pub fn default_with(seed: u64, horizon_days: u64) -> Self {
        let (plan, layout) = crate::plan::default_plan();
        Self {
            seed,
            horizon_days,
            speed_cm_s: crate::resident::walk::DEFAULT_SPEED_CM_S,
            plan,
            layout,
            templates: crate::resident::activity::default_templates(),
            mmse: MmseParams::default(),
            anomalies: AnomalySettings::default(),
        }
    }

    pub fn horizon_ticks(&self) -> Ticks {
        self.horizon_days * TICKS_PER_DAY
    }

    /// Every problem with the configuration, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut out: Vec<String> = validate(&self.plan, &self.layout).iter().map(ToString::to_string).collect();
        if self.horizon_days == 0 {
            out.push("horizon_days must be at least 1".into());
        }
        if !(self.speed_cm_s > 0.0 && self.speed_cm_s.is_finite()) {
            out.push("walking speed must be positive".into());
        }
        if !(self.anomalies.rate_scale >= 0.0 && self.anomalies.rate_scale.is_finite()) {
            out.push("anomaly rate_scale must be non-negative".into());
        }
        if !(0.0..=30.0).contains(&self.mmse.m0) {
            out.push("mmse.m0 must lie in [0, 30]".into());
        }
        if !self.templates.iter().any(ActivityTemplate::is_night_sleep) {
            out.push("a sleep template is required".into());
        }
        for t in &self.templates {
            if let Err(e) = t.validate() {
                out.push(e.to_string());
            }
            if let Some(s) = t.appliance {
                if !self.layout.cost_sensor_ids.contains(&s) {
                    out.push(format!("activity '{}' binds sensor #{s}, which is not a cost sensor", t.name));
                }
            }
        }
        let mut all = self.templates.clone();
        all.push(crate::resident::activity::nap_template());
        for name in missing_anchors(&all, &self.plan.anchors) {
            out.push(format!("activity '{name}' has no anchor in the floor plan"));
        }
        if self.plan.anchor("bed").is_none() || self.plan.anchor("entrance").is_none() {
            out.push("floor plan needs 'bed' and 'entrance' anchors".into());
        }
        out
    }
}

/// Ground truth per simulated day, attributed to the day an activity
/// starts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DailyTruth {
    pub sleep_hours: Vec<f64>,
    pub outings: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct SimSummary {
    pub episodes: Vec<AnomalyEpisode>,
    pub truth: DailyTruth,
    pub mmse: MmseTrajectory,
    pub warnings: Vec<String>,
    pub event_count: u64,
}

/// Convenience wrapper that collects all events in memory.
pub fn simulate_to_vec(cfg: &SimConfig) -> Result<(Vec<SensorEvent>, SimSummary)> {
    let mut events = Vec::new();
    let summary = simulate(cfg, |e| events.push(e))?;
    Ok((events, summary))
}

/// Runs the whole horizon, streaming events to `sink` in time order.
pub fn simulate(cfg: &SimConfig, sink: impl FnMut(SensorEvent)) -> Result<SimSummary> {
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    let months = cfg.horizon_days.div_ceil(DAYS_PER_MONTH) as usize;
    let mmse = simulate_mmse(cfg.seed, months, &cfg.mmse)?;
    let draw = |k: AnomalyKind| -> Result<Vec<EpisodeDraw>> {
        if !cfg.anomalies.enabled(k) {
            return Ok(Vec::new());
        }
        let mut rng = substream(cfg.seed, Stream::Episodes(k.index()), 0);
        let horizon = cfg.horizon_ticks();
        Ok(sample_episodes(k, &mmse, months, cfg.anomalies.rate_scale, &mut rng)?.into_iter().filter(|d| d.at < horizon).collect())
    };
    let weeks = realize_weeks_scale(&draw(AnomalyKind::SemiBedridden)?, &draw(AnomalyKind::Housebound)?, cfg.horizon_days);
    let modifiers: Vec<StatModifiers> = weeks.iter().map(stat_modifiers_for).collect::<Result<_>>()?;

    let mut world = World {
        cfg,
        engine: SensorEngine::new(&cfg.layout, cfg.horizon_ticks()),
        sink,
        pos: cfg.plan.anchor("bed").expect("validated"),
        now: 0,
        horizon: cfg.horizon_ticks(),
        watches: Vec::new(),
        episodes: weeks,
        wander: draw(AnomalyKind::Wandering)?.into(),
        fall_walk: draw(AnomalyKind::FallWalking)?.into(),
        fall_stand: VecDeque::new(),
        forget: draw(AnomalyKind::Forgetting)?.into(),
        truth: DailyTruth {
            sleep_hours: vec![0.0; cfg.horizon_days as usize],
            outings: vec![0; cfg.horizon_days as usize],
        },
        rng: substream(cfg.seed, Stream::Trajectory, 0),
        bed: cfg.plan.anchor("bed").expect("validated"),
    };
    let mut site_rng = substream(cfg.seed, Stream::Derived, 0);
    world.fall_stand = draw(AnomalyKind::FallStanding)?
        .into_iter()
        .map(|d| (d, if site_rng.random_bool(0.5) { FallSite::Origin } else { FallSite::Destination }))
        .collect();

    let start = PositionSample::upright(0, world.pos, false);
    world.sample(&start);
    let mut warnings = Vec::new();
    let mut awake = FIRST_WAKE;
    for day in 0..cfg.horizon_days {
        let active: Vec<StatModifiers> = modifiers.iter().filter(|m| m.is_active(day)).cloned().collect();
        let mut rng = substream(cfg.seed, Stream::Schedule, day);
        let sched = schedule_day(&cfg.templates, day, awake, &active, &mut rng)?;
        warnings.extend(sched.warnings);
        world.rng = substream(cfg.seed, Stream::Trajectory, day);
        for inst in &sched.instances {
            if inst.start >= world.horizon {
                break;
            }
            world.run_instance(inst);
        }
        awake = sched.next_awake;
        world.drain();
    }
    world.finish(warnings, mmse)
}

struct World<'a, S> {
    cfg: &'a SimConfig,
    engine: SensorEngine,
    sink: S,
    pos: P,
    now: Ticks,
    horizon: Ticks,
    /// Forgotten appliances with the end of the activity that used them.
    watches: Vec<(ReturnWatch, Ticks)>,
    episodes: Vec<AnomalyEpisode>,
    wander: VecDeque<EpisodeDraw>,
    fall_walk: VecDeque<EpisodeDraw>,
    fall_stand: VecDeque<(EpisodeDraw, FallSite)>,
    forget: VecDeque<EpisodeDraw>,
    truth: DailyTruth,
    rng: SimRng,
    bed: P,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum WalkKind {
    /// Between activities; may carry a fall.
    Transfer,
    /// Repositioning, wandering legs and returns.
    Plain,
}

impl<S: FnMut(SensorEvent)> World<'_, S> {
    fn drain(&mut self) {
        let sink = &mut self.sink;
        self.engine.drain(self.now, sink);
    }

    fn sample(&mut self, s: &PositionSample) {
        if s.time >= self.horizon {
            return;
        }
        self.engine.push_sample(s);
        self.pos = s.position;
        let mut i = 0;
        while i < self.watches.len() {
            let (w, activity_end) = &mut self.watches[i];
            if s.time >= *activity_end {
                if let Some(off) = w.observe(s.time, s.position) {
                    let (w, activity_end) = self.watches.swap_remove(i);
                    self.engine.close_appliance(w.sensor, off);
                    if off > activity_end {
                        self.episodes.push(AnomalyEpisode { kind: AnomalyKind::Forgetting, start: activity_end, end: off });
                    }
                    continue;
                }
            }
            i += 1;
        }
    }

    /// Moves along `seg`, then either stands still or lies fallen at the
    /// end point.
    fn run_walk(&mut self, seg: &WalkSegment, fallen_at_end: bool) {
        for t in seg.start..seg.end {
            self.sample(&PositionSample::upright(t, seg.position_at(t), true));
        }
        if fallen_at_end {
            // The collapse is itself a movement over the lying body's footprint.
            self.sample(&PositionSample { time: seg.end, position: seg.to, moving: true, body_radius: FALLEN_RADIUS });
            self.sample(&PositionSample { time: seg.end + 1, position: seg.to, moving: false, body_radius: FALLEN_RADIUS });
        } else {
            self.sample(&PositionSample { time: seg.end, position: seg.to, moving: false, body_radius: UPRIGHT_RADIUS });
        }
        self.now = seg.end;
    }

    fn walk(&mut self, seg: WalkSegment, kind: WalkKind) {
        if kind == WalkKind::Transfer {
            if let Some(plan) = self.take_fall(&seg) {
                self.run_walk(&plan.before, true);
                if plan.after.start < self.horizon {
                    self.episodes.push(plan.episode);
                }
                self.run_walk(&plan.after, false);
                return;
            }
        }
        self.run_walk(&seg, false);
    }

    fn take_fall(&mut self, seg: &WalkSegment) -> Option<crate::anomalies::FallPlan> {
        if let Some(&(d, site)) = self.fall_stand.front() {
            let at_bed = match site {
                FallSite::Origin => seg.from.distance(self.bed) <= ARRIVAL_TOLERANCE,
                _ => seg.to.distance(self.bed) <= ARRIVAL_TOLERANCE,
            };
            if d.at <= seg.start && at_bed {
                self.fall_stand.pop_front();
                let dur = d.duration.unwrap_or(300);
                return Some(inject_fall(AnomalyKind::FallStanding, seg, dur, site, &mut self.rng));
            }
        }
        if let Some(&d) = self.fall_walk.front() {
            if d.at <= seg.start && seg.duration() > MIN_FALL_WALK {
                self.fall_walk.pop_front();
                let dur = d.duration.unwrap_or(300);
                return Some(inject_fall(AnomalyKind::FallWalking, seg, dur, FallSite::Interior, &mut self.rng));
            }
        }
        None
    }

    fn anchor(&self, name: &str) -> P {
        self.cfg.plan.anchor(name).expect("validated anchor")
    }

    fn run_instance(&mut self, inst: &ActivityInstance) {
        let anchor = self.anchor(&inst.anchor);
        let travel = walk_ticks(self.pos, anchor, self.cfg.speed_cm_s);
        let depart = self.now.max(inst.start.saturating_sub(travel));
        if depart >= self.horizon {
            return;
        }
        self.now = depart;
        self.drain();
        let seg = plan_walk(self.pos, anchor, self.cfg.speed_cm_s, depart);
        self.walk(seg, WalkKind::Transfer);
        let start = self.now.max(inst.start);
        let end = inst.end.min(self.horizon);
        if start >= end {
            return;
        }
        let day = (start / TICKS_PER_DAY) as usize;
        if inst.is_outing {
            self.engine.push_absent(start);
            self.engine.push_door(start);
            self.now = end;
            self.drain();
            if end < self.horizon {
                self.engine.push_door(end);
                let entrance = self.anchor(&inst.anchor);
                // Stepping back in shows up on the entrance sensor just
                // after the door.
                let settled = (end + TICKS_PER_SECOND).min(self.horizon);
                self.sample(&PositionSample::upright(end, entrance, false));
                if end + 1 < settled {
                    self.sample(&PositionSample::upright(end + 1, entrance, true));
                    self.sample(&PositionSample::upright(settled, entrance, false));
                    self.now = settled;
                }
                self.truth.outings[day] += 1;
            }
            return;
        }
        if inst.is_sleep_segment && inst.end <= self.horizon {
            self.truth.sleep_hours[day] += (end - start) as f64 / 36_000.0;
        }
        if let Some(sensor) = inst.appliance {
            let forgotten = self.forget.front().is_some_and(|d| d.at <= start) && self.watches.is_empty();
            if forgotten {
                self.forget.pop_front();
                self.engine.push_appliance(sensor, start, Ticks::MAX);
                self.watches.push((ReturnWatch::new(sensor, anchor, end), end));
            } else {
                self.engine.push_appliance(sensor, start, end);
            }
        }
        self.stay(inst, anchor, start, end);
    }

    /// In-place activity with occasional repositioning and, when due, a
    /// wandering episode.
    fn stay(&mut self, inst: &ActivityInstance, anchor: P, start: Ticks, end: Ticks) {
        let can_wander = inst.appliance.is_none() && !inst.is_sleep_segment;
        let fidget = (inst.fidget_per_min > 0.0).then(|| Exp::new(inst.fidget_per_min / 600.0).expect("positive rate"));
        let mut t = start;
        loop {
            let next_fidget = fidget.as_ref().map_or(Ticks::MAX, |e| t.saturating_add(e.sample(&mut self.rng).ceil() as Ticks));
            if can_wander {
                if let Some(&d) = self.wander.front() {
                    let begin = d.at.max(t);
                    let dur = d.duration.unwrap_or(600);
                    if begin <= next_fidget.min(end) && begin + dur + WANDER_MARGIN <= end {
                        self.wander.pop_front();
                        self.wander_at(begin, dur, anchor);
                        t = self.now;
                        continue;
                    }
                }
            }
            if next_fidget >= end {
                break;
            }
            let target = self.fidget_target(anchor);
            let seg = plan_walk(self.pos, target, self.cfg.speed_cm_s, next_fidget);
            if seg.end >= end {
                break;
            }
            self.walk(seg, WalkKind::Plain);
            t = self.now;
        }
        self.now = end;
    }

    fn fidget_target(&mut self, anchor: P) -> P {
        let r = FIDGET_RADIUS * self.rng.random::<f64>().sqrt();
        let a = std::f64::consts::TAU * self.rng.random::<f64>();
        let b = self.cfg.plan.bounds();
        P::new((anchor.x + r * a.cos()).clamp(b.min.x, b.max.x), (anchor.y + r * a.sin()).clamp(b.min.y, b.max.y))
    }

    fn wander_at(&mut self, begin: Ticks, dur: Ticks, anchor: P) {
        self.now = begin;
        let legs = inject_wandering(begin, dur, self.pos, &self.cfg.plan, self.cfg.speed_cm_s, &mut self.rng);
        for leg in &legs {
            self.walk(leg.clone(), WalkKind::Plain);
        }
        self.episodes.push(AnomalyEpisode { kind: AnomalyKind::Wandering, start: begin, end: begin + dur });
        let back = plan_walk(self.pos, anchor, self.cfg.speed_cm_s, self.now);
        self.walk(back, WalkKind::Plain);
    }

    fn finish(mut self, warnings: Vec<String>, mmse: MmseTrajectory) -> Result<SimSummary> {
        let horizon = self.horizon;
        for (w, activity_end) in std::mem::take(&mut self.watches) {
            self.engine.close_appliance(w.sensor, horizon);
            if horizon > activity_end {
                self.episodes.push(AnomalyEpisode { kind: AnomalyKind::Forgetting, start: activity_end, end: horizon });
            }
        }
        self.now = self.now.min(horizon);
        self.drain();
        let sink = &mut self.sink;
        let event_count = self.engine.finish(horizon, sink);
        let mut episodes: Vec<_> = self.episodes.into_iter().filter(|e| e.start < horizon).collect();
        for e in &mut episodes {
            e.end = e.end.min(horizon);
        }
        episodes.sort_by_key(|e| (e.start, e.kind));
        Ok(SimSummary { episodes, truth: self.truth, mmse, warnings, event_count })
    }
}
