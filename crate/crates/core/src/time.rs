//! Simulation clock.
//!
//! All timestamps are integer ticks of 0.1 s counted from the simulation
//! epoch, which keeps event times exact and the CSV encoding lossless.

/// 0.1 s since the simulation epoch.
pub type Ticks = u64;

pub const TICKS_PER_SECOND: Ticks = 10;
pub const SECONDS_PER_HOUR: u64 = 3_600;
pub const SECONDS_PER_DAY: u64 = 86_400;
pub const TICKS_PER_DAY: Ticks = SECONDS_PER_DAY * TICKS_PER_SECOND;
/// Simulated months are 30 days; nine years are 9 x 360 days.
pub const DAYS_PER_MONTH: u64 = 30;
pub const TICKS_PER_MONTH: Ticks = DAYS_PER_MONTH * TICKS_PER_DAY;

pub fn ticks_from_secs(secs: f64) -> Ticks {
    (secs * TICKS_PER_SECOND as f64).round().max(0.0) as Ticks
}

pub fn ticks_to_secs(t: Ticks) -> f64 {
    t as f64 / TICKS_PER_SECOND as f64
}

/// Rounds a tick count up to the next whole second.
pub fn ceil_to_second(t: Ticks) -> Ticks {
    t.div_ceil(TICKS_PER_SECOND) * TICKS_PER_SECOND
}

pub fn day_of(t: Ticks) -> u64 {
    t / TICKS_PER_DAY
}

/// `d`-days `hh:mm:ss.s` -> ticks.
pub fn clock(days: u64, hours: u64, minutes: u64, deci_seconds: u64) -> Ticks {
    days * TICKS_PER_DAY + (hours * 3600 + minutes * 60) * TICKS_PER_SECOND + deci_seconds
}

/// Fixed one-decimal rendering, e.g. `913530.1`.
pub fn format_secs(t: Ticks) -> String {
    format!("{}.{}", t / TICKS_PER_SECOND, t % TICKS_PER_SECOND)
}

/// Parses a non-negative decimal with at most one fractional digit.
pub fn parse_secs(s: &str) -> Option<Ticks> {
    let s = s.trim();
    let (whole, frac) = match s.split_once('.') {
        Some((w, f)) => (w, f),
        None => (s, ""),
    };
    if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if frac.len() > 1 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let w: u64 = whole.parse().ok()?;
    let f: u64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    w.checked_mul(TICKS_PER_SECOND)?.checked_add(f)
}
