//! Activity templates and the daily scheduler.

use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::time::{Ticks, TICKS_PER_DAY, TICKS_PER_SECOND};

const HOUR: f64 = 3600.0 * TICKS_PER_SECOND as f64;
const MINUTE: f64 = 60.0 * TICKS_PER_SECOND as f64;
/// Time kept free after every instance for walking to the next one.
pub const WALK_BUFFER: Ticks = 30 * TICKS_PER_SECOND;
/// Gaps at least this long get a rest filler.
pub const FILLER_MIN: Ticks = 10 * 60 * TICKS_PER_SECOND;
const MIN_DURATION: f64 = MINUTE;
const EARLIEST_BEDTIME: f64 = 20.0 * HOUR;
const LATEST_BEDTIME: f64 = 23.0 * HOUR + 50.0 * MINUTE;
pub const REST: &str = "rest";

/// Scheduling precedence; earlier variants win conflicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    Sleep,
    Outing,
    Meal,
    Appliance,
    Other,
    Rest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityTemplate {
    pub name: String,
    pub anchor: String,
    pub start_mean_h: f64,
    pub start_sd_h: f64,
    pub duration_mean_min: f64,
    pub duration_sd_min: f64,
    pub frequency_per_day: f64,
    pub priority: Priority,
    /// Cost sensor switched on for the whole activity.
    #[serde(default)]
    pub appliance: Option<usize>,
    #[serde(default)]
    pub is_outing: bool,
    /// Counted as sleep in the daily ground truth.
    #[serde(default)]
    pub is_sleep_segment: bool,
    /// Exactly one instance per day instead of a Poisson count.
    #[serde(default)]
    pub fixed_count: bool,
    /// Rate of small repositioning moves around the anchor.
    #[serde(default)]
    pub fidget_per_min: f64,
}

impl ActivityTemplate {
    #[allow(clippy::too_many_arguments)]
    fn new(
        name: &str,
        anchor: &str,
        start: (f64, f64),
        duration: (f64, f64),
        frequency_per_day: f64,
        priority: Priority,
        fidget_per_min: f64,
    ) -> Self {
        Self {
            name: name.to_owned(),
            anchor: anchor.to_owned(),
            start_mean_h: start.0,
            start_sd_h: start.1,
            duration_mean_min: duration.0,
            duration_sd_min: duration.1,
            frequency_per_day,
            priority,
            appliance: None,
            is_outing: false,
            is_sleep_segment: false,
            fixed_count: false,
            fidget_per_min,
        }
    }

    fn with_appliance(mut self, id: usize) -> Self {
        self.appliance = Some(id);
        self
    }

    fn fixed(mut self) -> Self {
        self.fixed_count = true;
        self
    }

    fn sleep_segment(mut self) -> Self {
        self.is_sleep_segment = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.duration_mean_min > 0.0
            && self.duration_sd_min >= 0.0
            && self.start_sd_h >= 0.0
            && self.frequency_per_day >= 0.0
            && self.fidget_per_min >= 0.0
            && [self.start_mean_h, self.duration_mean_min, self.frequency_per_day].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("activity template '{}' has invalid statistics", self.name)))
        }
    }

    pub fn is_night_sleep(&self) -> bool {
        self.priority == Priority::Sleep
    }

    fn sample_duration(&self, rng: &mut SimRng) -> Ticks {
        truncated_normal(rng, self.duration_mean_min * MINUTE, self.duration_sd_min * MINUTE, MIN_DURATION) as Ticks
    }
}

/// Normal draw rejected until strictly above `floor`.
pub fn truncated_normal(rng: &mut SimRng, mean: f64, sd: f64, floor: f64) -> f64 {
    if sd <= 0.0 {
        return mean.max(floor + 1.0);
    }
    let n = Normal::new(mean, sd).expect("finite sd");
    for _ in 0..1000 {
        let v = n.sample(rng);
        if v > floor {
            return v;
        }
    }
    floor + 1.0
}

/// The resident's default weekday: one night's sleep, three meals with
/// cooking, outings, appliance use and household chores.
pub fn default_templates() -> Vec<ActivityTemplate> {
    use Priority::*;
    let t = ActivityTemplate::new;
    let mut outing = t("outing", "entrance", (13.0, 3.0), (40.0, 8.0), 4.0, Outing, 0.0);
    outing.is_outing = true;
    vec![
        t("sleep", "bed", (23.0, 0.5), (480.0, 24.0), 1.0, Sleep, 0.0).fixed().sleep_segment(),
        outing,
        t("breakfast", "dining", (7.9, 0.3), (20.0, 4.0), 1.0, Meal, 0.5).fixed(),
        t("lunch", "dining", (12.4, 0.5), (25.0, 5.0), 1.0, Meal, 0.5).fixed(),
        t("dinner", "dining", (18.6, 0.5), (30.0, 6.0), 1.0, Meal, 0.5).fixed(),
        t("cook_breakfast", "stove", (7.5, 0.3), (12.0, 3.0), 1.0, Appliance, 3.5).with_appliance(39),
        t("cook_lunch", "stove", (12.0, 0.5), (15.0, 4.0), 1.0, Appliance, 3.5).with_appliance(39),
        t("cook_dinner", "stove", (18.0, 0.5), (25.0, 6.0), 1.0, Appliance, 3.5).with_appliance(39),
        t("tv", "sofa", (20.0, 1.0), (60.0, 20.0), 1.0, Appliance, 0.2).with_appliance(38),
        t("kitchen_faucet", "kitchen_sink", (14.0, 4.0), (5.0, 1.5), 4.0, Appliance, 3.5).with_appliance(36),
        t("washbasin", "washbasin", (13.0, 5.0), (4.0, 1.0), 3.0, Appliance, 3.5).with_appliance(37),
        t("toilet", "toilet", (13.0, 5.0), (6.0, 2.0), 5.0, Other, 0.5),
        t("phone", "phone", (15.0, 3.0), (15.0, 5.0), 1.0, Other, 0.5),
        t("wardrobe", "wardrobe", (9.0, 3.0), (6.0, 2.0), 2.0, Other, 3.5),
        t("laundry", "washing_machine", (10.0, 2.0), (10.0, 3.0), 0.5, Other, 3.5),
        t("fridge", "refrigerator", (14.0, 4.0), (2.0, 0.5), 4.0, Other, 3.5),
        t("trash", "trash", (15.0, 4.0), (2.0, 0.5), 1.0, Other, 3.5),
        t(REST, "sofa", (15.0, 2.0), (60.0, 15.0), 1.0, Rest, 0.2),
    ]
}

/// The extra bed rest added while semi-bedridden.
pub fn nap_template() -> ActivityTemplate {
    ActivityTemplate::new("nap", "bed", (14.5, 1.0), (40.0, 8.0), 1.0, Priority::Meal, 0.0).fixed().sleep_segment()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyRule {
    Scale(f64),
    Set(f64),
}

/// Statistical changes to the daily routine, active on days
/// `start_day..end_day`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StatModifiers {
    pub start_day: u64,
    pub end_day: u64,
    #[serde(default)]
    pub frequency: Vec<(String, FrequencyRule)>,
    #[serde(default)]
    pub duration_shift_min: Vec<(String, f64)>,
    #[serde(default)]
    pub added: Vec<ActivityTemplate>,
}

impl StatModifiers {
    pub fn is_active(&self, day: u64) -> bool {
        (self.start_day..self.end_day).contains(&day)
    }

    pub fn apply(&self, templates: &mut Vec<ActivityTemplate>) {
        for t in templates.iter_mut() {
            for (name, rule) in &self.frequency {
                if *name == t.name {
                    t.frequency_per_day = match *rule {
                        FrequencyRule::Scale(k) => t.frequency_per_day * k,
                        FrequencyRule::Set(v) => v,
                    };
                }
            }
            for (name, shift) in &self.duration_shift_min {
                if *name == t.name {
                    t.duration_mean_min += shift;
                }
            }
        }
        for a in &self.added {
            if !templates.iter().any(|t| t.name == a.name) {
                templates.push(a.clone());
            }
        }
    }

    /// Names referenced by rules that are not among `templates`.
    pub fn unknown_references(&self, templates: &[ActivityTemplate]) -> Vec<String> {
        self.frequency
            .iter()
            .map(|(n, _)| n)
            .chain(self.duration_shift_min.iter().map(|(n, _)| n))
            .filter(|n| !templates.iter().any(|t| &t.name == *n))
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityInstance {
    pub name: String,
    pub anchor: String,
    pub start: Ticks,
    pub end: Ticks,
    pub priority: Priority,
    pub appliance: Option<usize>,
    pub is_outing: bool,
    pub is_sleep_segment: bool,
    pub fidget_per_min: f64,
}

impl ActivityInstance {
    fn from_template(t: &ActivityTemplate, start: Ticks, end: Ticks) -> Self {
        Self {
            name: t.name.clone(),
            anchor: t.anchor.clone(),
            start,
            end,
            priority: t.priority,
            appliance: t.appliance,
            is_outing: t.is_outing,
            is_sleep_segment: t.is_sleep_segment,
            fidget_per_min: t.fidget_per_min,
        }
    }

    pub fn duration(&self) -> Ticks {
        self.end - self.start
    }

    /// Cost-sensor window for appliance activities.
    pub fn appliance_window(&self) -> Option<(usize, Ticks, Ticks)> {
        self.appliance.map(|s| (s, self.start, self.end))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaySchedule {
    /// Time-ordered; the last instance is the night's sleep.
    pub instances: Vec<ActivityInstance>,
    pub warnings: Vec<String>,
    /// When the resident wakes up after this day's sleep.
    pub next_awake: Ticks,
}

/// Templates in effect on `day` after applying every active modifier.
pub fn effective_templates(templates: &[ActivityTemplate], day: u64, modifiers: &[StatModifiers]) -> Vec<ActivityTemplate> {
    let mut eff = templates.to_vec();
    for m in modifiers.iter().filter(|m| m.is_active(day)) {
        m.apply(&mut eff);
    }
    eff
}

/// Draws one day's activities between `awake_from` and bedtime, followed
/// by the night's sleep.
pub fn schedule_day(
    templates: &[ActivityTemplate],
    day: u64,
    awake_from: Ticks,
    modifiers: &[StatModifiers],
    rng: &mut SimRng,
) -> Result<DaySchedule> {
    if templates.is_empty() {
        return Err(Error::InvalidParameter("no activity templates".into()));
    }
    let eff = effective_templates(templates, day, modifiers);
    for t in &eff {
        t.validate()?;
    }
    let sleep = eff
        .iter()
        .find(|t| t.is_night_sleep())
        .ok_or_else(|| Error::InvalidParameter("a sleep template is required".into()))?;
    let day_start = day * TICKS_PER_DAY;
    let awake_from = awake_from.max(day_start);
    let mut warnings = Vec::new();

    let bed = Normal::new(sleep.start_mean_h * HOUR, sleep.start_sd_h * HOUR).expect("validated");
    let mut bedtime = day_start + bed.sample(rng).clamp(EARLIEST_BEDTIME, LATEST_BEDTIME) as Ticks;
    bedtime = bedtime.max(awake_from + WALK_BUFFER);
    let sleep_len = sleep.sample_duration(rng);

    let mut order: Vec<&ActivityTemplate> = eff.iter().filter(|t| !t.is_night_sleep()).collect();
    order.sort_by_key(|t| t.priority);

    // Occupied spans include the trailing walk buffer.
    let mut placed: Vec<(Ticks, Ticks, ActivityInstance)> = Vec::new();
    for t in order {
        let count = if t.fixed_count {
            usize::from(t.frequency_per_day > 0.0)
        } else if t.frequency_per_day > 0.0 {
            Poisson::new(t.frequency_per_day).expect("positive rate").sample(rng) as usize
        } else {
            0
        };
        let start_law = Normal::new(t.start_mean_h * HOUR, t.start_sd_h * HOUR).expect("validated");
        for _ in 0..count {
            let want = day_start as f64 + start_law.sample(rng);
            let len = t.sample_duration(rng);
            match find_slot(&placed, awake_from, bedtime, want, len + WALK_BUFFER) {
                Some(s) => {
                    let inst = ActivityInstance::from_template(t, s, s + len);
                    let pos = placed.partition_point(|p| p.0 < s);
                    placed.insert(pos, (s, s + len + WALK_BUFFER, inst));
                }
                None => warnings.push(format!("day {day}: no room for '{}', dropped", t.name)),
            }
        }
    }

    let filler = eff.iter().find(|t| t.name == REST);
    let mut instances = Vec::with_capacity(placed.len() * 2 + 1);
    let mut cursor = awake_from;
    let gaps: Vec<(Ticks, Ticks)> = placed
        .iter()
        .map(|p| (p.0, p.1))
        .chain(std::iter::once((bedtime, bedtime)))
        .collect();
    let mut it = placed.into_iter();
    for (s, e) in gaps {
        if let Some(f) = filler {
            if s >= cursor + FILLER_MIN {
                instances.push(ActivityInstance::from_template(f, cursor, s - WALK_BUFFER));
            }
        }
        if let Some(p) = it.next() {
            instances.push(p.2);
        }
        cursor = e;
    }
    let mut night = ActivityInstance::from_template(sleep, bedtime, bedtime + sleep_len);
    night.start = bedtime;
    instances.push(night);
    Ok(DaySchedule { instances, warnings, next_awake: bedtime + sleep_len })
}

/// Start time closest to `want` at which `need` ticks fit into
/// `[lo, hi)` without touching `placed`.
fn find_slot(placed: &[(Ticks, Ticks, ActivityInstance)], lo: Ticks, hi: Ticks, want: f64, need: Ticks) -> Option<Ticks> {
    let mut best: Option<(f64, Ticks)> = None;
    let mut gap_start = lo;
    let bounds = placed.iter().map(|p| (p.0, p.1)).chain(std::iter::once((hi, hi)));
    for (s, e) in bounds {
        if s >= gap_start + need {
            let latest = s - need;
            let pick = (want.round().max(0.0) as Ticks).clamp(gap_start, latest);
            let cost = (pick as f64 - want).abs();
            if best.is_none_or(|b| cost < b.0) {
                best = Some((cost, pick));
            }
        }
        gap_start = gap_start.max(e);
    }
    best.map(|b| b.1)
}

/// Whether every template's anchor exists in `anchors`.
pub fn missing_anchors<'a>(templates: &'a [ActivityTemplate], anchors: &std::collections::BTreeMap<String, crate::geometry::Point<f64>>) -> Vec<&'a str> {
    templates.iter().filter(|t| !anchors.contains_key(&t.anchor)).map(|t| t.name.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use std::collections::HashMap;

    fn run_days(templates: &[ActivityTemplate], mods: &[StatModifiers], days: u64) -> Vec<DaySchedule> {
        let mut awake = 7 * 3600 * 10;
        (0..days)
            .map(|d| {
                let mut rng = substream(42, Stream::Schedule, d);
                let s = schedule_day(templates, d, awake, mods, &mut rng).unwrap();
                awake = s.next_awake;
                s
            })
            .collect()
    }

    #[test]
    fn sleep_only_statistics() {
        let sleep: Vec<_> = default_templates().into_iter().filter(|t| t.name == "sleep").collect();
        let days = run_days(&sleep, &[], 10_000);
        assert!(days.iter().all(|d| d.instances.len() == 1));
        let mean = days.iter().map(|d| d.instances[0].duration() as f64).sum::<f64>() / days.len() as f64;
        let target = 480.0 * MINUTE;
        assert!((mean / target - 1.0).abs() < 0.02, "{}", mean / MINUTE);
    }

    #[test]
    fn housebound_outing_rate() {
        let mods = [StatModifiers {
            start_day: 0,
            end_day: u64::MAX,
            frequency: vec![("outing".into(), FrequencyRule::Set(1.0 / 14.0))],
            ..Default::default()
        }];
        let days = run_days(&default_templates(), &mods, 10_000);
        let outings = days.iter().flat_map(|d| &d.instances).filter(|i| i.is_outing).count();
        let rate = outings as f64 / 10_000.0;
        assert!((rate * 14.0 - 1.0).abs() < 0.2, "{rate}");
    }

    #[test]
    fn zero_frequency_never_scheduled() {
        let mut t = default_templates();
        t.iter_mut().find(|t| t.name == "phone").unwrap().frequency_per_day = 0.0;
        let days = run_days(&t, &[], 500);
        assert!(days.iter().flat_map(|d| &d.instances).all(|i| i.name != "phone"));
    }

    #[test]
    fn schedules_are_ordered_and_in_day() {
        let days = run_days(&default_templates(), &[], 2000);
        for (d, s) in days.iter().enumerate() {
            let day_start = d as u64 * TICKS_PER_DAY;
            let n = s.instances.len();
            for w in s.instances.windows(2) {
                assert!(w[0].end <= w[1].start, "day {d}: {:?} / {:?}", w[0].name, w[1].name);
            }
            for i in &s.instances {
                assert!(i.start < i.end);
                assert!(i.start >= day_start);
            }
            for i in &s.instances[..n - 1] {
                assert!(i.end <= day_start + TICKS_PER_DAY);
            }
            assert_eq!(s.instances[n - 1].name, "sleep");
        }
    }

    #[test]
    fn template_statistics_match() {
        let templates = default_templates();
        // 1e5 days keeps the Poisson error of rare templates well under 2%.
        let n = 100_000u64;
        let days = run_days(&templates, &[], n);
        let mut count: HashMap<&str, (f64, f64)> = HashMap::new();
        for i in days.iter().flat_map(|d| &d.instances) {
            let e = count.entry(i.name.as_str()).or_default();
            e.0 += 1.0;
            e.1 += i.duration() as f64 / MINUTE;
        }
        for t in templates.iter().filter(|t| t.name != REST) {
            let (c, dur) = count[t.name.as_str()];
            let freq = c / n as f64;
            assert!((freq / t.frequency_per_day - 1.0).abs() < 0.02, "{} freq {freq}", t.name);
            let mean = dur / c;
            assert!((mean / t.duration_mean_min - 1.0).abs() < 0.02, "{} duration {mean}", t.name);
        }
    }

    #[test]
    fn modifiers_outside_span_are_noops() {
        let mods = [StatModifiers {
            start_day: 100,
            end_day: 110,
            frequency: vec![("outing".into(), FrequencyRule::Scale(0.0))],
            added: vec![nap_template()],
            ..Default::default()
        }];
        let base = run_days(&default_templates(), &[], 50);
        let modded = run_days(&default_templates(), &mods, 50);
        assert_eq!(base, modded);
        assert!(mods[0].unknown_references(&default_templates()).is_empty());
    }
}
