//! End-to-end acceptance checks, one line per criterion. Runs as its own
//! harness so every line prints even when a criterion fails; the process
//! exits non-zero if any does.

use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::thread;
use std::time::Instant;

use homesim::detectors::sequence::{fit_sequence, SequenceModel, Variant};
use homesim::detectors::threshold::{fit_threshold, Direction, ThresholdDetector};
use homesim::experiment::{reproduce, ReproduceOptions, Scale};
use homesim::metrics::{label_intervals, score};
use homesim::pipeline::{binarize, forgetting_features, nonresponse_duration, DailySeries, IntervalSet, LabelTrack, SensorSet};
use homesim::plan::{default_plan, sensor_distance, SensorKind, SensorLayout};
use homesim::resident::mmse::{simulate_mmse, MmseParams};
use homesim::sensors::SensorEvent;
use homesim::simulator::{simulate_to_vec, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- metrics

fn runs(bits: &[bool]) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &b) in bits.iter().chain([false].iter()).enumerate() {
        match (b, start) {
            (true, None) => start = Some(i as u64),
            (false, Some(s)) => {
                out.push((s, i as u64 - 1));
                start = None;
            }
            _ => {}
        }
    }
    out
}

fn overlaps(a: (u64, u64), b: (u64, u64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let worked = label_intervals(&[false, true, true, true, false, false, true, true, false]);
    ensure(worked.as_slice() == [(1, 3), (6, 7)], || format!("worked example gave {:?}", worked.as_slice()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..1000 {
        let len = rng.random_range(1..=500usize);
        let (pt, pp) = (rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
        let (st, sp) = (rng.random_range(0.5..0.99), rng.random_range(0.5..0.99));
        let mut gen = |p: f64, stay: f64| {
            let mut on = false;
            (0..len)
                .map(|_| {
                    on = if on { rng.random_bool(stay) } else { rng.random_bool(p * (1.0 - stay)) };
                    on
                })
                .collect::<Vec<bool>>()
        };
        let t = gen(pt, st);
        let p = gen(pp, sp);
        let days = rng.random_range(0.5..10.0);
        let truth = LabelTrack { unit: 1, len: len as u64, intervals: IntervalSet::from_bits(&t) };
        let pred = LabelTrack { unit: 1, len: len as u64, intervals: IntervalSet::from_bits(&p) };
        let r = score(&truth, &pred, days, 0).map_err(|e| e.to_string())?;

        let ti = runs(&t);
        let pi = runs(&p);
        let hit = ti.iter().filter(|&&a| pi.iter().any(|&b| overlaps(a, b))).count();
        let correct = pi.iter().filter(|&&b| ti.iter().any(|&a| overlaps(a, b))).count();
        let sens = (!ti.is_empty()).then(|| hit as f64 / ti.len() as f64);
        let prec = (!pi.is_empty()).then(|| correct as f64 / pi.len() as f64);
        let far = (pi.len() - correct) as f64 / days;
        let mal = (!pi.is_empty()).then(|| pi.iter().map(|&(s, e)| (e - s) as f64).sum::<f64>() / pi.len() as f64);
        ensure(r.sensitivity == sens, || format!("case {case}: sensitivity {:?} vs {:?}", r.sensitivity, sens))?;
        ensure(r.interval_precision == prec, || format!("case {case}: precision {:?} vs {:?}", r.interval_precision, prec))?;
        ensure(r.far_per_day == far, || format!("case {case}: FAR {} vs {}", r.far_per_day, far))?;
        ensure(r.mal == mal, || format!("case {case}: MAL {:?} vs {:?}", r.mal, mal))?;
    }
    let s = start.elapsed().as_secs_f64();
    ensure(s < 10.0, || format!("took {s:.1} s"))?;
    Ok(format!("1000 random track pairs match the pairwise oracle, worked example [1,3],[6,7] ({s:.2} s)"))
}

// --------------------------------------------------------------- features

fn random_events(rng: &mut ChaCha8Rng, sensors: usize, n: usize, seconds: u64) -> Vec<SensorEvent> {
    let horizon = seconds * 10;
    let mut on = vec![false; sensors];
    let mut last: Vec<Option<u64>> = vec![None; sensors];
    let mut out = Vec::with_capacity(n);
    let mut t = rng.random_range(0..20u64);
    let mean_step = (horizon / n as u64).max(1);
    while out.len() < n && t < horizon {
        let id = rng.random_range(0..sensors);
        if last[id] != Some(t) {
            out.push(SensorEvent { time: t, sensor: id as u16, state: !on[id] });
            on[id] = !on[id];
            last[id] = Some(t);
        }
        t += if rng.random_bool(0.3) { 0 } else { rng.random_range(1..=2 * mean_step) };
    }
    out.sort();
    out
}

/// Second k covers ticks (10k, 10k + 10]; a sensor on over ticks [a, b]
/// marks every second it touches, and a zero-length pulse marks the
/// second containing it.
fn naive_matrix(events: &[SensorEvent], sensors: usize, seconds: u64) -> Vec<SensorSet> {
    let mut cols = vec![SensorSet::EMPTY; seconds as usize];
    let mut mark = |id: usize, a: u64, b: u64| {
        let lo_k = (a / 10).saturating_sub(1);
        let hi_k = (b / 10 + 1).min(seconds - 1);
        for k in lo_k..=hi_k {
            let (lo, hi) = (k * 10, k * 10 + 10);
            if (a <= hi && b > lo) || (a == b && a > lo && a <= hi) || (k == 0 && a == 0) {
                cols[k as usize].insert(id);
            }
        }
    };
    let mut since: Vec<Option<u64>> = vec![None; sensors];
    for e in events {
        let id = e.sensor as usize;
        if e.state {
            since[id] = Some(e.time);
        } else if let Some(a) = since[id].take() {
            mark(id, a, e.time);
        }
    }
    for (id, s) in since.iter().enumerate() {
        if let Some(a) = *s {
            mark(id, a, seconds * 10);
        }
    }
    cols
}

/// Per-second replay: a motion sensor counts seconds since its reset while
/// it belongs to the latest set of firing motion sensors, and reads zero
/// otherwise. Pressure mats already in that set are not reset.
fn naive_nrd(cols: &[SensorSet], layout: &SensorLayout) -> Vec<Vec<u32>> {
    let ids = layout.motion_ids();
    let mut reset = vec![0u64; ids.len()];
    let mut latest = SensorSet::EMPTY;
    let mut out = Vec::with_capacity(cols.len());
    for (j, col) in cols.iter().enumerate() {
        let j = j as u64;
        let fired: Vec<usize> = ids.iter().copied().filter(|&id| col.contains(id)).collect();
        if !fired.is_empty() {
            for (l, &id) in ids.iter().enumerate() {
                let sticky = layout.sensors[id].kind == SensorKind::Pressure && latest.contains(id);
                if fired.contains(&id) && !sticky {
                    reset[l] = j;
                }
            }
            latest = SensorSet::from_ids(fired);
        }
        out.push(ids.iter().enumerate().map(|(l, &id)| if latest.contains(id) { (j - reset[l]).min(86_400) as u32 } else { 0 }).collect());
    }
    out
}

/// Tick-by-tick replay over 2-hour windows: total ON time of cost sensors
/// and the largest distance from an ON cost sensor to another ON sensor.
fn naive_forgetting(events: &[SensorEvent], layout: &SensorLayout, horizon: u64) -> (Vec<f64>, Vec<f64>) {
    const WINDOW: u64 = 72_000;
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
        for &c in layout.cost_sensor_ids.iter().filter(|&&c| on[c]) {
            f1[w] += 1;
            for s in (0..layout.len()).filter(|&s| s != c && on[s]) {
                f2[w] = f2[w].max(sensor_distance(layout, c, s).expect("valid ids"));
            }
        }
    }
    (f1.iter().map(|&t| t as f64 / 10.0).collect(), f2)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (_, layout) = default_plan();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut total = 0usize;
    for trace in 0..100 {
        let n = if trace % 10 == 0 { 100_000 } else { rng.random_range(100..20_000usize) };
        let seconds = (n as u64 / 4).max(50) + rng.random_range(0..500u64);
        let ev = random_events(&mut rng, layout.len(), n, seconds);
        total += ev.len();
        let m = binarize(&ev, layout.len(), seconds).map_err(|e| e.to_string())?;
        let cols = naive_matrix(&ev, layout.len(), seconds);
        for (k, want) in cols.iter().enumerate() {
            ensure(m.column(k as u64) == *want, || format!("trace {trace}: matrix column {k} differs"))?;
        }
        let want = naive_nrd(&cols, &layout);
        let nrd = nonresponse_duration(&m, &layout).map_err(|e| e.to_string())?;
        let mut rows = nrd.rows(0, seconds);
        while let Some((j, row)) = rows.next_row() {
            ensure(row == &want[j as usize][..], || format!("trace {trace}: NRD row {j} differs"))?;
        }
        let f = forgetting_features(&ev, &layout, seconds * 10);
        let (f1, f2) = naive_forgetting(&ev, &layout, seconds * 10);
        ensure(f.f1 == f1, || format!("trace {trace}: forgetting f1 differs"))?;
        ensure(f.f2 == f2, || format!("trace {trace}: forgetting f2 differs"))?;
    }
    let s = start.elapsed().as_secs_f64();
    ensure(s < 60.0, || format!("took {s:.1} s"))?;
    Ok(format!("binarize, nonresponse durations and forgetting features match replay on 100 traces ({total} events, {s:.1} s)"))
}

// -------------------------------------------------------------- threshold

fn naive_classify(values: &[f64], theta: f64, below: bool) -> Vec<bool> {
    let hit: Vec<bool> = values.iter().map(|&v| if below { v < theta } else { v > theta }).collect();
    let mut out = vec![false; hit.len()];
    for (s, e) in runs(&hit) {
        if e - s + 1 >= 7 {
            for d in s..=e {
                out[d as usize] = true;
            }
        }
    }
    out
}

fn naive_f1(pred: &[bool], truth: &[bool]) -> f64 {
    let tp = pred.iter().zip(truth).filter(|(p, t)| **p && **t).count() as f64;
    let fp = pred.iter().zip(truth).filter(|(p, t)| **p && !**t).count() as f64;
    let fn_ = pred.iter().zip(truth).filter(|(p, t)| !**p && **t).count() as f64;
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

fn criterion_3() -> Outcome {
    let s = ThresholdDetector::new(8.02_f64, 1.15, 0.10, Direction::Above);
    let h = ThresholdDetector::new(3.95_f64, 2.12, 1.80, Direction::Below);
    ensure((s.theta - 8.13).abs() <= 0.01, || format!("sleep threshold {}", s.theta))?;
    ensure((h.theta - 0.14).abs() <= 0.01, || format!("outing threshold {}", h.theta))?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..200 {
        let days = rng.random_range(60..400usize);
        let below = rng.random_bool(0.5);
        let mut truth = vec![false; days];
        let mut values: Vec<f64> = (0..days).map(|_| rng.random_range(0.0..6.0)).collect();
        for _ in 0..rng.random_range(1..4) {
            let a = rng.random_range(0..days);
            let len = rng.random_range(3..30).min(days - a);
            for d in a..a + len {
                truth[d] = true;
                values[d] = if below { rng.random_range(-3.0..2.5) } else { rng.random_range(3.5..9.0) };
            }
        }
        let labels = LabelTrack { unit: 86_400, len: days as u64, intervals: IntervalSet::from_bits(&truth) };
        let dir = if below { Direction::Below } else { Direction::Above };
        let d = fit_threshold(&values, &labels, dir, None).map_err(|e| e.to_string())?;
        let (mu, sd) = (d.mu, d.sigma);
        let best = (0..=80)
            .map(|k| -1.0 + 0.05 * k as f64)
            .map(|c| naive_f1(&naive_classify(&values, if below { mu - c * sd } else { mu + c * sd }, below), &truth))
            .fold(0.0, f64::max);
        let got = naive_f1(&naive_classify(&values, d.theta, below), &truth);
        ensure((got - best).abs() < 1e-12, || format!("case {case}: fitted F1 {got} below grid maximum {best}"))?;
        ensure(((d.c + 1.0) / 0.05 - ((d.c + 1.0) / 0.05).round()).abs() < 1e-9, || format!("case {case}: c {} off the grid", d.c))?;
    }
    Ok(format!("theta {:.3} and {:.3}; fitted c attains the grid maximum F1 on 200 cases", s.theta, h.theta))
}

// --------------------------------------------------------------- sequence

fn enumerate(m: &SequenceModel<f64>, cols: &[SensorSet]) -> Vec<[f64; 2]> {
    let n = cols.len();
    let emit = |z: usize, c: SensorSet| -> f64 { m.b.iter().enumerate().map(|(s, p)| if c.contains(s) { p[z] } else { 1.0 - p[z] }).product() };
    let mut marg = vec![[0.0; 2]; n];
    let mut total = 0.0;
    for path in 0..1u32 << n {
        let z = |t: usize| (path >> t & 1) as usize;
        let mut p = m.pi[z(0)] * emit(z(0), cols[0]);
        for t in 1..n {
            p *= m.a[z(t - 1)][z(t)] * emit(z(t), cols[t]);
        }
        total += p;
        for (t, mt) in marg.iter_mut().enumerate() {
            mt[z(t)] += p;
        }
    }
    marg.iter().map(|m| [m[0] / total, m[1] / total]).collect()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let p = rng.random_range(0.05..0.95);
        let q = rng.random_range(0.05..0.95);
        let pi0 = rng.random_range(0.05..0.95);
        let m = SequenceModel {
            variant: Variant::Hmm,
            sensors: 3,
            pi: [pi0, 1.0 - pi0],
            a: [[p, 1.0 - p], [1.0 - q, q]],
            b: (0..3).map(|_| [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)]).collect(),
        };
        let n = rng.random_range(1..=8);
        let cols: Vec<SensorSet> = (0..n).map(|_| SensorSet(rng.random_range(0..8u128))).collect();
        let got = m.posteriors(&cols[..]).map_err(|e| e.to_string())?;
        for (g, w) in got.iter().zip(enumerate(&m, &cols)) {
            worst = worst.max((g[0] - w[0]).abs()).max((g[1] - w[1]).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("posterior error {worst:e}"))?;
    let mut row_err = 0.0f64;
    for seed in 0..50 {
        let ev = random_events(&mut rng, 3, 400, 2000);
        let mx = binarize(&ev, 3, 2000).map_err(|e| e.to_string())?;
        let bits: Vec<bool> = {
            let mut on = rng.random_bool(0.5);
            (0..2000).map(|_| {
                if rng.random_bool(0.02) {
                    on = !on;
                }
                on
            })
            .collect()
        };
        let labels = LabelTrack { unit: 1, len: 2000, intervals: IntervalSet::from_bits(&bits) };
        for v in [Variant::Dnb, Variant::Hmm] {
            let m: SequenceModel<f64> = fit_sequence(&mx, &labels, v).map_err(|e| format!("seed {seed}: {e}"))?;
            for row in m.a {
                row_err = row_err.max((row[0] + row[1] - 1.0).abs());
            }
        }
    }
    ensure(row_err <= 1e-12, || format!("transition row sum off by {row_err:e}"))?;
    Ok(format!("posteriors within {worst:.1e} of enumeration on 500 chains; transition rows sum to 1 within {row_err:.1e}"))
}

// -------------------------------------------------------------- simulator

fn mae(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len().min(b.len()).max(1) as f64
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig::default_with(1, 9 * 360);
    let (events, summary) = simulate_to_vec(&cfg).map_err(|e| e.to_string())?;
    let n = events.len();
    let est = DailySeries::estimate(&events, &cfg.layout, cfg.horizon_days);
    drop(events);
    let sleep = mae(&est.sleep_hours, &summary.truth.sleep_hours) * 60.0;
    let truth_out: Vec<f64> = summary.truth.outings.iter().map(|&o| o as f64).collect();
    let outs = mae(&est.outings_f64(), &truth_out);
    let flat = simulate_mmse(1, 108, &MmseParams { noise_sd: 0.0, ..MmseParams::default() }).map_err(|e| e.to_string())?.final_value();
    ensure((5_000_000..=10_000_000).contains(&n), || format!("{n} activations"))?;
    ensure(sleep <= 10.0, || format!("sleep MAE {sleep:.2} min"))?;
    ensure(outs <= 0.1, || format!("outing MAE {outs:.3}"))?;
    ensure((flat - 19.5).abs() <= 0.01, || format!("MMSE endpoint {flat}"))?;
    let s = start.elapsed().as_secs_f64();
    ensure(s < 1800.0, || format!("took {s:.0} s"))?;
    Ok(format!("{n} activations, sleep MAE {sleep:.2} min/day, outing MAE {outs:.4}/day, MMSE endpoint {flat:.3} ({s:.0} s)"))
}

// ------------------------------------------------------------ detection

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let r = reproduce(&ReproduceOptions::new(Scale::Desk, 1), |_| {}).map_err(|e| e.to_string())?;
    let s = start.elapsed().as_secs_f64();
    println!("{r}");
    let failed: Vec<String> = r
        .rows
        .iter()
        .filter(|row| row.pass == Some(false))
        .map(|row| format!("{}/{} {} s: sensitivity {}", row.spec.anomaly.name(), row.spec.method.name(), row.spec.denoise, row.report.sensitivity.map_or("-".into(), |v| format!("{v:.3}"))))
        .collect();
    ensure(failed.is_empty(), || format!("outside band: {} ({s:.0} s)", failed.join("; ")))?;
    ensure(s < 900.0, || format!("took {s:.0} s"))?;
    Ok(format!("every gated row inside its band ({s:.0} s)"))
}

// ---------------------------------------------------------- determinism

fn simulate_checksum(dir: &std::path::Path, seed: u64) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_homesim"))
        .args(["simulate", "--days", "20", "--seed", &seed.to_string(), "--out"])
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    std::fs::read(dir.join("events.csv")).map_err(|e| e.to_string())
}

fn criterion_7() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = simulate_checksum(&tmp.path().join("a"), 7)?;
    let b = simulate_checksum(&tmp.path().join("b"), 7)?;
    let c = simulate_checksum(&tmp.path().join("c"), 8)?;
    ensure(!a.is_empty() && a == b, || "same seed produced different event files".into())?;
    ensure(a != c, || "different seeds produced identical event files".into())?;
    Ok(format!("identical {}-byte event files for one seed, different for another", a.len()))
}

fn main() {
    let criteria: [(u8, fn() -> Outcome); 7] =
        [(1, criterion_1), (2, criterion_2), (3, criterion_3), (4, criterion_4), (5, criterion_5), (6, criterion_6), (7, criterion_7)];
    let handles: Vec<_> = criteria
        .into_iter()
        .map(|(n, f)| (n, thread::spawn(move || panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into())))))
        .collect();
    let mut failures = 0;
    let mut lines = Vec::new();
    for (n, h) in handles {
        let line = match h.join().unwrap_or_else(|_| Err("thread panicked".into())) {
            Ok(msg) => format!("criterion {n}: PASS  {msg}"),
            Err(msg) => {
                failures += 1;
                format!("criterion {n}: FAIL  {msg}")
            }
        };
        println!("{line}");
        lines.push(line);
    }
    println!();
    for l in &lines {
        println!("{l}");
    }
    if failures > 0 {
        println!("{failures} of 7 acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 7 acceptance criteria passed");
}
