use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use homesim::anomalies::AnomalyKind;
use homesim::config::{LayoutFile, RunConfig, TemplatesFile};
use homesim::detectors::denoise::denoise;
use homesim::detectors::model_io::{Method, ModelFile};
use homesim::experiment::{self, default_denoise, Dataset, ReproduceOptions, Scale, TrainOptions};
use homesim::metrics::{fmt_opt, score};
use homesim::pipeline::daily::DailySeries;
use homesim::pipeline::io::{read_episodes, read_track, write_daily, write_episodes, write_forgetting, write_track};
use homesim::rng::{derive_seed, Stream};
use homesim::sensors::{read_events, write_events};
use homesim::simulator::simulate_to_vec;
use homesim::time::SECONDS_PER_DAY;

use crate::manifest::{sha256_hex, Manifest};

const CONFIG: &str = "config.toml";
const LAYOUT: &str = "layout.toml";
const TEMPLATES: &str = "templates.toml";
const EVENTS: &str = "events.csv";
const EPISODES: &str = "episodes.csv";

fn label_file(kind: AnomalyKind) -> String {
    format!("labels/{}.csv", kind.name())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

/// Relative path of `p` inside `dir` when it lies there, for the manifest.
fn relative(dir: &Path, p: &Path) -> Option<String> {
    p.strip_prefix(dir).ok().map(|r| r.to_string_lossy().into_owned())
}

fn update_manifest(dir: &Path, stage: &str, seconds: f64, files: &[String]) -> Result<()> {
    let mut m = Manifest::load(dir)?.with_context(|| format!("{} has no manifest; run `simulate` first", dir.display()))?;
    m.record(dir, stage, seconds, files)?;
    m.save(dir)
}

pub fn simulate(config: Option<&Path>, seed: Option<u64>, days: Option<u64>, out: Option<&Path>) -> Result<u8> {
    let start = Instant::now();
    let (mut rc, base) = match config {
        Some(p) => (RunConfig::load(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(s) = seed {
        rc.seed = s;
    }
    if let Some(d) = days {
        rc.horizon_days = d;
    }
    let cfg = rc.to_sim_config(&base)?;
    let dir = match out.map(Path::to_path_buf).or_else(|| rc.output_dir.as_ref().map(|o| base.join(o))) {
        Some(d) => d,
        None => bail!(homesim::Error::Config("no output directory: pass --out or set output_dir".into())),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    // The run directory carries its own copy of everything the simulation
    // read, so later stages need nothing else.
    let layout_text = toml::to_string(&LayoutFile { plan: cfg.plan.clone(), layout: cfg.layout.clone() })?;
    let templates_text = toml::to_string(&TemplatesFile { templates: cfg.templates.clone() })?;
    let resolved = RunConfig {
        layout_file: Some(LAYOUT.into()),
        templates_file: Some(TEMPLATES.into()),
        output_dir: None,
        ..rc.clone()
    };
    let config_text = resolved.to_toml();
    fs::write(dir.join(LAYOUT), &layout_text)?;
    fs::write(dir.join(TEMPLATES), &templates_text)?;
    fs::write(dir.join(CONFIG), &config_text)?;
    let config_hash = sha256_hex(format!("{config_text}\n{layout_text}\n{templates_text}").as_bytes());

    let (events, summary) = simulate_to_vec(&cfg)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    write_events(&events, create(&dir.join(EVENTS))?)?;
    write_episodes(&summary.episodes, create(&dir.join(EPISODES))?)?;
    let ds = Dataset::new(cfg.layout.clone(), cfg.horizon_days, Vec::new(), summary.episodes.clone())?;
    let mut files: Vec<String> = [CONFIG, LAYOUT, TEMPLATES, EVENTS, EPISODES].map(String::from).to_vec();
    for kind in AnomalyKind::ALL {
        let f = label_file(kind);
        let mut w = create(&dir.join(&f))?;
        write_track(&ds.labels(kind)?, Some(kind), &mut w)?;
        w.flush()?;
        files.push(f);
    }
    let truth = DailySeries { sleep_hours: summary.truth.sleep_hours.clone(), outings: summary.truth.outings.clone() };
    let mut w = create(&dir.join("truth/daily.csv"))?;
    write_daily(&truth, &mut w)?;
    w.flush()?;
    files.push("truth/daily.csv".into());

    let mut m = Manifest { seed: rc.seed, config_hash, ..Default::default() };
    m.record(&dir, "simulate", start.elapsed().as_secs_f64(), &files)?;
    m.save(&dir)?;

    println!("{} days, {} events, seed {}", cfg.horizon_days, events.len(), rc.seed);
    for kind in AnomalyKind::ALL {
        println!("{:<15} {} episodes", kind.name(), summary.episodes.iter().filter(|e| e.kind == kind).count());
    }
    println!("final MMSE {:.2}", summary.mmse.final_value());
    println!("wrote {}", dir.display());
    Ok(0)
}

struct Run {
    config: RunConfig,
    dataset: Dataset,
}

fn load_run(dir: &Path) -> Result<Run> {
    let config = RunConfig::load(&dir.join(CONFIG))?;
    let sim = config.to_sim_config(dir)?;
    let events = read_events(open(&dir.join(EVENTS))?)?;
    let episodes = read_episodes(open(&dir.join(EPISODES))?)?;
    let dataset = Dataset::new(sim.layout, sim.horizon_days, events, episodes)?;
    Ok(Run { config, dataset })
}

fn mae(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = a.into_iter().zip(b).fold((0.0, 0usize), |(s, n), (x, y)| (s + (x - y).abs(), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn preprocess(dir: &Path) -> Result<u8> {
    let start = Instant::now();
    let run = load_run(dir)?;
    let ds = &run.dataset;
    let daily = ds.daily()?;
    let forgetting = ds.forgetting()?;
    let mut w = create(&dir.join("features/daily.csv"))?;
    write_daily(daily, &mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("features/forgetting.csv"))?;
    write_forgetting(forgetting, &mut w)?;
    w.flush()?;
    let m = ds.matrix()?;
    let nrd = ds.nrd()?;
    println!("{} sensors x {} s, {} motion sensors with nonresponse durations", m.sensors, m.seconds, nrd.motion_ids.len());

    let truth_path = dir.join("truth/daily.csv");
    if truth_path.exists() {
        let t = homesim::pipeline::io::read_daily(open(&truth_path)?)?;
        let sleep = mae(daily.sleep_hours.iter().copied(), t.sleep_hours.iter().copied()) * 60.0;
        let outs = mae(daily.outings_f64(), t.outings_f64());
        println!("sleep MAE {sleep:.2} min/day, outing MAE {outs:.4}/day");
    }
    update_manifest(dir, "preprocess", start.elapsed().as_secs_f64(), &["features/daily.csv".into(), "features/forgetting.csv".into()])?;
    Ok(0)
}

pub struct TrainRequest<'a> {
    pub run: &'a Path,
    pub anomaly: AnomalyKind,
    pub method: Method,
    pub out: Option<&'a Path>,
    pub seed: Option<u64>,
    pub threshold_fallback: bool,
}

pub fn train(req: &TrainRequest) -> Result<u8> {
    experiment::check_pairing(req.anomaly, req.method)?;
    let start = Instant::now();
    let run = load_run(req.run)?;
    let mut opts = TrainOptions { threshold_fallback: req.threshold_fallback, ..Default::default() };
    opts.forest.seed = req.seed.unwrap_or_else(|| derive_seed(run.config.seed, Stream::Tree, 0));
    let (model, log) = experiment::train(&run.dataset, req.anomaly, req.method, &opts)?;
    for l in &log {
        println!("{l}");
    }
    let path = req
        .out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| req.run.join(format!("models/{}-{}.model", req.anomaly.name(), req.method.name())));
    let mut w = create(&path)?;
    model.write(&mut w)?;
    w.flush()?;
    println!("wrote {}", path.display());
    let files: Vec<String> = relative(req.run, &path).into_iter().collect();
    update_manifest(req.run, &format!("train {}/{}", req.anomaly.name(), req.method.name()), start.elapsed().as_secs_f64(), &files)?;
    Ok(0)
}

pub fn detect(dir: &Path, model_path: &Path, threshold: Option<u64>, out: Option<&Path>) -> Result<u8> {
    let start = Instant::now();
    let model = ModelFile::read(open(model_path)?)?;
    let run = load_run(dir)?;
    let raw = experiment::detect(&run.dataset, &model)?;
    let threshold = threshold.unwrap_or_else(|| default_denoise(model.anomaly, model.method));
    let pred = denoise(&raw, threshold);
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(format!("predictions/{}-{}.csv", model.anomaly.name(), model.method.name())));
    let mut w = create(&path)?;
    write_track(&pred, Some(model.anomaly), &mut w)?;
    w.flush()?;
    println!(
        "{} {}: {} alarms ({} before denoising at {threshold})",
        model.anomaly.name(),
        model.method,
        pred.intervals.len(),
        raw.intervals.len()
    );
    println!("wrote {}", path.display());
    let files: Vec<String> = relative(dir, &path).into_iter().collect();
    update_manifest(dir, &format!("detect {}/{}", model.anomaly.name(), model.method.name()), start.elapsed().as_secs_f64(), &files)?;
    Ok(0)
}

pub fn evaluate(
    pred_path: &Path,
    truth: Option<&Path>,
    run: Option<&Path>,
    days: Option<f64>,
    threshold: u64,
    out: Option<&Path>,
) -> Result<u8> {
    let (pred, anomaly) = read_track(open(pred_path)?)?;
    let truth_path = match (truth, run, anomaly) {
        (Some(t), _, _) => t.to_path_buf(),
        (None, Some(r), Some(k)) => r.join(label_file(k)),
        (None, Some(_), None) => bail!(homesim::Error::InvalidParameter("prediction names no anomaly; pass --truth".into())),
        (None, None, _) => bail!(homesim::Error::InvalidParameter("pass --truth or --run".into())),
    };
    let (truth, truth_kind) = read_track(open(&truth_path)?)?;
    if let (Some(a), Some(b)) = (anomaly, truth_kind) {
        if a != b {
            bail!(homesim::Error::TrackMismatch(format!("prediction is for {a}, truth for {b}")));
        }
    }
    let days = days.unwrap_or((truth.len * truth.unit) as f64 / SECONDS_PER_DAY as f64);
    let r = score(&truth, &pred, days, threshold)?;
    let unit = truth.unit as f64;
    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(
        w,
        "anomaly,denoise,true_intervals,predicted_intervals,raw_precision,raw_recall,precision,sensitivity,far_per_day,mal_seconds,mal_inclusive_seconds"
    )?;
    let o = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{:.6},{},{}",
        anomaly.or(truth_kind).map(|k| k.name()).unwrap_or(""),
        threshold,
        r.true_intervals,
        r.predicted_intervals,
        o(r.raw_precision),
        o(r.raw_recall),
        o(r.interval_precision),
        o(r.sensitivity),
        r.far_per_day,
        o(r.mal.map(|m| m * unit)),
        o(r.mal_inclusive.map(|m| m * unit)),
    )?;
    w.flush()?;
    if out.is_some() {
        println!("sensitivity {} FAR {:.4}/day", fmt_opt(r.sensitivity), r.far_per_day);
    }
    Ok(0)
}

pub fn reproduce(scale: Scale, seed: u64, replicates: Option<u64>, days: Option<u64>, out: Option<&Path>, strict: bool) -> Result<u8> {
    let start = Instant::now();
    let mut opts = ReproduceOptions::new(scale, seed);
    opts.replicates = replicates;
    opts.days = days;
    let rep = experiment::reproduce(&opts, |l| eprintln!("[{:8.1} s] {l}", start.elapsed().as_secs_f64()))?;
    print!("{rep}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut w = create(&dir.join("report.csv"))?;
        rep.write_csv(&mut w)?;
        w.flush()?;
        fs::write(dir.join("report.txt"), rep.to_string())?;
        let key = format!("scale={} seed={seed} replicates={:?} days={:?}", scale.name(), replicates, days);
        let mut m = Manifest { seed, config_hash: sha256_hex(key.as_bytes()), ..Default::default() };
        m.record(dir, "reproduce", start.elapsed().as_secs_f64(), &["report.csv".into(), "report.txt".into()])?;
        m.save(dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(if strict && !rep.passed() { 1 } else { 0 })
}
