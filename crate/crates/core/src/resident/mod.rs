//! Resident behaviour: cognitive decline, daily schedules and walking.

pub mod activity;
pub mod mmse;
pub mod walk;

pub use activity::{
    default_templates, schedule_day, ActivityInstance, ActivityTemplate, DaySchedule, FrequencyRule, Priority,
    StatModifiers,
};
pub use mmse::{simulate_mmse, MmseParams, MmseTrajectory};
pub use walk::{plan_walk, WalkSegment, DEFAULT_SPEED_CM_S};
