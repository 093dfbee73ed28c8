//! Text formats for episodes, label tracks, daily series and features.
//!
//! Every file starts with `# key=value` header lines followed by a CSV
//! body with a column header row. Times are seconds with one decimal,
//! track positions are 0-based.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::daily::DailySeries;
use super::forgetting::{ForgettingFeatures, WINDOW_SECONDS};
use super::labels::{IntervalSet, LabelTrack};
use crate::anomalies::{AnomalyEpisode, AnomalyKind};
use crate::error::{Error, Result};
use crate::time::{format_secs, parse_secs};

/// Header values and body lines of a commented CSV file.
pub struct Document {
    pub header: BTreeMap<String, String>,
    /// `(line number, fields)` of body rows after the column header.
    pub rows: Vec<(u64, Vec<String>)>,
}

impl Document {
    pub fn read(source: impl BufRead) -> Result<Self> {
        let mut header = BTreeMap::new();
        let mut rows = Vec::new();
        let mut seen_columns = false;
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let n = i as u64 + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(h) = t.strip_prefix('#') {
                if let Some((k, v)) = h.split_once('=') {
                    header.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if !seen_columns {
                seen_columns = true;
                continue;
            }
            rows.push((n, t.split(',').map(|f| f.trim().to_string()).collect()));
        }
        Ok(Self { header, rows })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.header
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse { line: 0, message: format!("missing or invalid header '{key}'") })
    }
}

fn field<T: std::str::FromStr>(row: &(u64, Vec<String>), i: usize) -> Result<T> {
    row.1
        .get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse { line: row.0, message: format!("bad field {}", i + 1) })
}

fn secs_field(row: &(u64, Vec<String>), i: usize) -> Result<u64> {
    row.1
        .get(i)
        .and_then(|v| parse_secs(v))
        .ok_or_else(|| Error::Parse { line: row.0, message: format!("bad time in field {}", i + 1) })
}

pub fn write_episodes(eps: &[AnomalyEpisode], mut w: impl Write) -> Result<()> {
    writeln!(w, "# format=episodes")?;
    writeln!(w, "anomaly,start_s,end_s")?;
    for e in eps {
        writeln!(w, "{},{},{}", e.kind.name(), format_secs(e.start), format_secs(e.end))?;
    }
    Ok(())
}

pub fn read_episodes(r: impl BufRead) -> Result<Vec<AnomalyEpisode>> {
    let doc = Document::read(r)?;
    doc.rows
        .iter()
        .map(|row| {
            let kind: AnomalyKind = row.1[0].parse().map_err(|_| Error::Parse { line: row.0, message: "unknown anomaly".into() })?;
            Ok(AnomalyEpisode { kind, start: secs_field(row, 1)?, end: secs_field(row, 2)? })
        })
        .collect()
}

pub fn write_track(track: &LabelTrack, anomaly: Option<AnomalyKind>, mut w: impl Write) -> Result<()> {
    writeln!(w, "# format=label-track")?;
    if let Some(k) = anomaly {
        writeln!(w, "# anomaly={}", k.name())?;
    }
    writeln!(w, "# unit_seconds={}", track.unit)?;
    writeln!(w, "# length={}", track.len)?;
    writeln!(w, "start,end")?;
    for (s, e) in track.intervals.iter() {
        writeln!(w, "{s},{e}")?;
    }
    Ok(())
}

pub fn read_track(r: impl BufRead) -> Result<(LabelTrack, Option<AnomalyKind>)> {
    let doc = Document::read(r)?;
    let unit: u64 = doc.get("unit_seconds")?;
    let len: u64 = doc.get("length")?;
    let anomaly = doc.header.get("anomaly").map(|s| s.parse()).transpose()?;
    let mut spans = Vec::with_capacity(doc.rows.len());
    for row in &doc.rows {
        let (s, e): (u64, u64) = (field(row, 0)?, field(row, 1)?);
        if s > e || e >= len {
            return Err(Error::Parse { line: row.0, message: format!("interval [{s}, {e}] outside track of length {len}") });
        }
        spans.push((s, e));
    }
    Ok((LabelTrack { unit, len, intervals: IntervalSet::from_unsorted(spans) }, anomaly))
}

pub fn write_daily(d: &DailySeries, mut w: impl Write) -> Result<()> {
    writeln!(w, "# format=daily")?;
    writeln!(w, "# unit_seconds=86400")?;
    writeln!(w, "day,sleep_hours,outings")?;
    for (i, (s, o)) in d.sleep_hours.iter().zip(&d.outings).enumerate() {
        writeln!(w, "{i},{s},{o}")?;
    }
    Ok(())
}

pub fn read_daily(r: impl BufRead) -> Result<DailySeries> {
    let doc = Document::read(r)?;
    let mut d = DailySeries::default();
    for row in &doc.rows {
        d.sleep_hours.push(field(row, 1)?);
        d.outings.push(field(row, 2)?);
    }
    Ok(d)
}

pub fn write_forgetting(f: &ForgettingFeatures, mut w: impl Write) -> Result<()> {
    writeln!(w, "# format=forgetting-features")?;
    writeln!(w, "# unit_seconds={WINDOW_SECONDS}")?;
    writeln!(w, "window,f1_seconds,f2_meters")?;
    for i in 0..f.len() {
        writeln!(w, "{i},{},{}", f.f1[i], f.f2[i])?;
    }
    Ok(())
}

pub fn read_forgetting(r: impl BufRead) -> Result<ForgettingFeatures> {
    let doc = Document::read(r)?;
    let mut f = ForgettingFeatures { f1: Vec::new(), f2: Vec::new() };
    for row in &doc.rows {
        f.f1.push(field(row, 1)?);
        f.f2.push(field(row, 2)?);
    }
    Ok(f)
}
