//! Train/detect orchestration per anomaly and method, and the end-to-end
//! train-on-simulation, test-on-simulation comparison run.

use std::cell::OnceCell;
use std::fmt;
use std::io::Write;
use std::time::Instant;

use crate::anomalies::{AnomalyEpisode, AnomalyKind};
use crate::detectors::cart::{fit_tree, TreeParams};
use crate::detectors::model_io::{Method, Model, ModelFile};
use crate::detectors::sequence::fit_sequence_smoothed;
use crate::detectors::threshold::mean_sd;
use crate::detectors::{denoise, fit_forest, fit_threshold, Decoding, Direction, ForestParams, Variant};
use crate::error::{Error, Result};
use crate::metrics::{ScoreCounts, ScoreReport};
use crate::pipeline::{
    binarize, forgetting_features, nonresponse_duration, summarize_labels, DailySeries, DataMatrix, ForgettingFeatures,
    LabelTrack, NrdMatrix,
};
use crate::plan::SensorLayout;
use crate::rng::{derive_seed, Stream};
use crate::sensors::SensorEvent;
use crate::simulator::{simulate_to_vec, SimConfig, SimSummary};
use crate::time::{SECONDS_PER_DAY, TICKS_PER_DAY};
use crate::ThresholdDetector;

/// Every supported (anomaly, method) pairing.
pub const PAIRINGS: [(AnomalyKind, Method); 8] = [
    (AnomalyKind::SemiBedridden, Method::St),
    (AnomalyKind::Housebound, Method::St),
    (AnomalyKind::Forgetting, Method::Dt),
    (AnomalyKind::Wandering, Method::Dnb),
    (AnomalyKind::Wandering, Method::Hmm),
    (AnomalyKind::FallWalking, Method::Rf),
    (AnomalyKind::FallStanding, Method::Dnb),
    (AnomalyKind::FallStanding, Method::Hmm),
];

pub fn check_pairing(kind: AnomalyKind, method: Method) -> Result<()> {
    if PAIRINGS.contains(&(kind, method)) {
        return Ok(());
    }
    let valid: Vec<String> = PAIRINGS.iter().map(|(k, m)| format!("{k}/{}", m.name())).collect();
    Err(Error::UnsupportedPairing { anomaly: kind.to_string(), method: method.name().into(), valid: valid.join(", ") })
}

/// Denoise threshold, in label units, applied when none is given.
pub fn default_denoise(kind: AnomalyKind, method: Method) -> u64 {
    match (kind, method) {
        (AnomalyKind::Wandering, Method::Hmm) => 28,
        (AnomalyKind::Wandering, Method::Dnb) => 5,
        (AnomalyKind::FallWalking, _) => 16,
        (AnomalyKind::FallStanding, Method::Hmm) => 6,
        _ => 0,
    }
}

/// Events and episodes over whole days, with derived features computed on
/// first use.
pub struct Dataset {
    pub layout: SensorLayout,
    pub days: u64,
    pub events: Vec<SensorEvent>,
    pub episodes: Vec<AnomalyEpisode>,
    matrix: OnceCell<DataMatrix>,
    daily: OnceCell<DailySeries>,
    forgetting: OnceCell<ForgettingFeatures>,
    nrd: OnceCell<NrdMatrix>,
}

impl fmt::Debug for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dataset")
            .field("days", &self.days)
            .field("sensors", &self.layout.len())
            .field("events", &self.events.len())
            .field("episodes", &self.episodes.len())
            .finish()
    }
}

fn cached<T>(cell: &OnceCell<T>, make: impl FnOnce() -> Result<T>) -> Result<&T> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let v = make()?;
    Ok(cell.get_or_init(|| v))
}

impl Dataset {
    pub fn new(layout: SensorLayout, days: u64, events: Vec<SensorEvent>, episodes: Vec<AnomalyEpisode>) -> Result<Self> {
        if days == 0 {
            return Err(Error::InvalidParameter("dataset needs at least one day".into()));
        }
        Ok(Self {
            layout,
            days,
            events,
            episodes,
            matrix: OnceCell::new(),
            daily: OnceCell::new(),
            forgetting: OnceCell::new(),
            nrd: OnceCell::new(),
        })
    }

    pub fn simulate(cfg: &SimConfig) -> Result<(Self, SimSummary)> {
        let (events, summary) = simulate_to_vec(cfg)?;
        let ds = Self::new(cfg.layout.clone(), cfg.horizon_days, events, summary.episodes.clone())?;
        Ok((ds, summary))
    }

    pub fn seconds(&self) -> u64 {
        self.days * SECONDS_PER_DAY
    }

    pub fn matrix(&self) -> Result<&DataMatrix> {
        cached(&self.matrix, || binarize(&self.events, self.layout.len(), self.seconds()))
    }

    pub fn daily(&self) -> Result<&DailySeries> {
        cached(&self.daily, || Ok(DailySeries::estimate(&self.events, &self.layout, self.days)))
    }

    pub fn forgetting(&self) -> Result<&ForgettingFeatures> {
        cached(&self.forgetting, || Ok(forgetting_features(&self.events, &self.layout, self.days * TICKS_PER_DAY)))
    }

    pub fn nrd(&self) -> Result<&NrdMatrix> {
        let m = self.matrix()?;
        cached(&self.nrd, || nonresponse_duration(m, &self.layout))
    }

    pub fn labels(&self, kind: AnomalyKind) -> Result<LabelTrack> {
        summarize_labels(self.episodes.iter().filter(|e| e.kind == kind), kind.unit_seconds(), self.seconds())
    }

    /// Number of ground-truth label intervals of `kind`.
    pub fn true_intervals(&self, kind: AnomalyKind) -> Result<usize> {
        Ok(self.labels(kind)?.intervals.len())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub forest: ForestParams,
    pub tree: TreeParams,
    /// Additive smoothing for the sequence models.
    pub alpha: f64,
    /// When training days hold no episode, fit mean and deviation as
    /// usual but take the threshold from [`PUBLISHED_THETA_SLEEP`] or
    /// [`PUBLISHED_THETA_OUTINGS`] instead of failing.
    pub threshold_fallback: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { forest: ForestParams::default(), tree: TreeParams::default(), alpha: 1.0, threshold_fallback: false }
    }
}

/// Thresholds of the published sleep (hours) and outing (count) detectors.
/// Reusing `c` instead would put the outing threshold below zero whenever
/// the spread of daily outings is a little wider, so the threshold itself
/// is carried over.
pub const PUBLISHED_THETA_SLEEP: f64 = 8.13;
pub const PUBLISHED_THETA_OUTINGS: f64 = 0.14;

fn fit_or_fallback(
    values: &[f64],
    labels: &LabelTrack,
    direction: Direction,
    exclude: Option<&[bool]>,
    fallback_theta: Option<f64>,
    log: &mut Vec<String>,
) -> Result<ThresholdDetector> {
    match (fit_threshold(values, labels, direction, exclude), fallback_theta) {
        (Err(Error::NoPositives(_)), Some(theta)) => {
            let (mu, sigma) = mean_sd(values);
            let c = match direction {
                Direction::Above => (theta - mu) / sigma,
                Direction::Below => (mu - theta) / sigma,
            };
            let c = if c.is_finite() { c } else { 0.0 };
            log.push(format!("no positive days in training data; threshold falls back to {theta}"));
            let mut d = ThresholdDetector::new(mu, sigma, c, direction);
            d.theta = theta;
            Ok(d)
        }
        (r, _) => r,
    }
}

fn forgetting_rows(f: &ForgettingFeatures) -> Vec<Vec<f64>> {
    (0..f.len()).map(|w| f.row(w).to_vec()).collect()
}

/// Fits the detector for `kind` with `method`; the log holds one line
/// per fact worth printing.
pub fn train(ds: &Dataset, kind: AnomalyKind, method: Method, opts: &TrainOptions) -> Result<(ModelFile, Vec<String>)> {
    check_pairing(kind, method)?;
    let mut log = Vec::new();
    let labels = ds.labels(kind)?;
    log.push(format!("{kind}: {} positive units in {} true intervals", labels.positives(), labels.intervals.len()));
    let model = match method {
        Method::St => {
            let daily = ds.daily()?;
            let semi = ds.labels(AnomalyKind::SemiBedridden)?;
            let fb = |c: f64| opts.threshold_fallback.then_some(c);
            if kind == AnomalyKind::SemiBedridden {
                let d = fit_or_fallback(&daily.sleep_hours, &semi, Direction::Above, None, fb(PUBLISHED_THETA_SLEEP), &mut log)?;
                log.push(format!("sleep: mu {:.3} sd {:.3} c {:.2} theta {:.3}", d.mu, d.sigma, d.c, d.theta));
                Model::Threshold { sleep: Some(d), outings: None }
            } else {
                let sleep = match fit_or_fallback(&daily.sleep_hours, &semi, Direction::Above, None, fb(PUBLISHED_THETA_SLEEP), &mut log) {
                    Ok(d) => Some(d),
                    Err(Error::NoPositives(_)) => {
                        log.push("no semi-bedridden days in training data; housebound runs without exclusion".into());
                        None
                    }
                    Err(e) => return Err(e),
                };
                let exclude = sleep.as_ref().map(|d| d.classify(&daily.sleep_hours, None));
                let d =
                    fit_or_fallback(&daily.outings_f64(), &labels, Direction::Below, exclude.as_deref(), fb(PUBLISHED_THETA_OUTINGS), &mut log)?;
                log.push(format!("outings: mu {:.3} sd {:.3} c {:.2} theta {:.3}", d.mu, d.sigma, d.c, d.theta));
                Model::Threshold { sleep, outings: Some(d) }
            }
        }
        Method::Dt => {
            if labels.positives() == 0 {
                return Err(Error::NoPositives(kind.to_string()));
            }
            let f = ds.forgetting()?;
            let (tree, warnings) = fit_tree(&forgetting_rows(f), &labels.to_bits(), &opts.tree)?;
            log.extend(warnings);
            log.push(format!("tree: {} nodes, depth {}, {} leaves", tree.nodes.len(), tree.depth(), tree.leaves()));
            Model::Tree(tree)
        }
        Method::Rf => {
            let forest = fit_forest(ds.nrd()?, &labels, &opts.forest).map_err(|e| match e {
                Error::NoPositives(_) => Error::NoPositives(kind.to_string()),
                e => e,
            })?;
            let nodes: usize = forest.trees.iter().map(|t| t.nodes.len()).sum();
            log.push(format!("forest: {} trees, {nodes} nodes", forest.trees.len()));
            Model::Forest(forest)
        }
        Method::Dnb | Method::Hmm => {
            let variant = if method == Method::Hmm { Variant::Hmm } else { Variant::Dnb };
            let m = fit_sequence_smoothed::<f64>(ds.matrix()?, &labels, variant, opts.alpha).map_err(|e| match e {
                Error::SingleClass if labels.positives() == 0 => Error::NoPositives(kind.to_string()),
                e => e,
            })?;
            log.push(format!("pi [{:.3e}, {:.3e}], stay [{:.6}, {:.6}]", m.pi[0], m.pi[1], m.a[0][0], m.a[1][1]));
            Model::Sequence(m)
        }
    };
    Ok((ModelFile { anomaly: kind, method, sensors: ds.layout.len(), model }, log))
}

/// Raw predicted track at the anomaly's label unit, before denoising.
pub fn detect(ds: &Dataset, model: &ModelFile) -> Result<LabelTrack> {
    if model.sensors != ds.layout.len() {
        return Err(Error::DimensionMismatch { expected: model.sensors, got: ds.layout.len() });
    }
    check_pairing(model.anomaly, model.method)?;
    let day_track = |bits: Vec<bool>| LabelTrack::from_bits(SECONDS_PER_DAY, &bits);
    match &model.model {
        Model::Threshold { sleep, outings } => {
            let daily = ds.daily()?;
            match (model.anomaly, sleep, outings) {
                (AnomalyKind::SemiBedridden, Some(s), _) => Ok(day_track(s.classify(&daily.sleep_hours, None))),
                (AnomalyKind::Housebound, s, Some(o)) => {
                    let exclude = s.as_ref().map(|s| s.classify(&daily.sleep_hours, None));
                    Ok(day_track(o.classify(&daily.outings_f64(), exclude.as_deref())))
                }
                _ => Err(Error::Model(format!("threshold model lacks the detector needed for {}", model.anomaly))),
            }
        }
        Model::Tree(tree) => {
            let f = ds.forgetting()?;
            let bits: Vec<bool> = forgetting_rows(f).iter().map(|r| tree.predict(r)).collect();
            Ok(LabelTrack::from_bits(model.anomaly.unit_seconds(), &bits))
        }
        Model::Forest(forest) => {
            let nrd = ds.nrd()?;
            if forest.motion_ids != nrd.motion_ids {
                return Err(Error::DimensionMismatch { expected: forest.motion_ids.len(), got: nrd.motion_ids.len() });
            }
            forest.predict(nrd)
        }
        Model::Sequence(m) => m.predict(ds.matrix()?, Decoding::Posterior),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

impl Scale {
    pub fn days(self) -> u64 {
        match self {
            Scale::Desk => 2 * 360,
            Scale::Full => 9 * 360,
        }
    }

    pub fn rate_scale(self) -> f64 {
        match self {
            Scale::Desk => 3.0,
            Scale::Full => 1.0,
        }
    }

    pub fn replicates(self) -> u64 {
        match self {
            Scale::Desk => 5,
            Scale::Full => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::InvalidParameter(format!("unknown scale '{s}', expected desk or full"))),
        }
    }
}

/// Published result for one report row. `mal_seconds` converts the
/// published mean alarm length to seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub raw_precision: Option<f64>,
    pub raw_recall: Option<f64>,
    pub interval_precision: f64,
    pub sensitivity: f64,
    pub far_per_day: f64,
    pub mal_seconds: f64,
}

/// Pass band on pooled results; `None` leaves a metric unchecked.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Band {
    pub min_sensitivity: Option<f64>,
    pub max_sensitivity: Option<f64>,
    pub max_far: Option<f64>,
}

impl Band {
    pub fn check(&self, r: &ScoreReport) -> bool {
        let sens = r.sensitivity.unwrap_or(0.0);
        self.min_sensitivity.is_none_or(|m| sens >= m)
            && self.max_sensitivity.is_none_or(|m| sens <= m)
            && self.max_far.is_none_or(|m| r.far_per_day <= m)
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(m) = self.min_sensitivity {
            parts.push(format!("sens>={m}"));
        }
        if let Some(m) = self.max_sensitivity {
            parts.push(format!("sens<={m}"));
        }
        if let Some(m) = self.max_far {
            parts.push(format!("far<={m}"));
        }
        f.write_str(&parts.join(" "))
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowSpec {
    pub anomaly: AnomalyKind,
    pub method: Method,
    pub denoise: u64,
    pub reference: Reference,
    /// Gating band at desk scale.
    pub desk_band: Option<Band>,
}

const fn reference(rp: Option<f64>, rr: Option<f64>, ip: f64, sens: f64, far: f64, mal_seconds: f64) -> Reference {
    Reference { raw_precision: rp, raw_recall: rr, interval_precision: ip, sensitivity: sens, far_per_day: far, mal_seconds }
}

const fn band(min_sens: f64, max_far: Option<f64>) -> Option<Band> {
    Some(Band { min_sensitivity: Some(min_sens), max_sensitivity: None, max_far })
}

const DAY: f64 = 86_400.0;
const HOUR: f64 = 3_600.0;

pub const ROWS: [RowSpec; 12] = [
    RowSpec {
        anomaly: AnomalyKind::SemiBedridden,
        method: Method::St,
        denoise: 0,
        reference: reference(Some(0.97), Some(0.80), 1.0, 1.0, 0.0, 14.9 * DAY),
        desk_band: band(0.8, Some(0.05)),
    },
    RowSpec {
        anomaly: AnomalyKind::Housebound,
        method: Method::St,
        denoise: 0,
        reference: reference(Some(0.82), Some(1.0), 0.54, 1.0, 0.004, 9.2 * DAY),
        desk_band: band(0.8, Some(0.05)),
    },
    RowSpec {
        anomaly: AnomalyKind::Forgetting,
        method: Method::Dt,
        denoise: 0,
        reference: reference(Some(0.98), Some(0.93), 0.74, 1.0, 0.01, 23.4 * HOUR),
        desk_band: band(0.8, Some(0.1)),
    },
    RowSpec {
        anomaly: AnomalyKind::Wandering,
        method: Method::Dnb,
        denoise: 0,
        reference: reference(Some(0.10), Some(0.53), 0.10, 1.0, 68.2, 2.78),
        desk_band: None,
    },
    RowSpec {
        anomaly: AnomalyKind::Wandering,
        method: Method::Dnb,
        denoise: 5,
        reference: reference(None, None, 0.10, 0.97, 13.1, 5.97),
        desk_band: None,
    },
    RowSpec {
        anomaly: AnomalyKind::Wandering,
        method: Method::Hmm,
        denoise: 0,
        reference: reference(Some(0.10), Some(1.0), 0.006, 1.0, 45.9, 8.85),
        desk_band: None,
    },
    RowSpec {
        anomaly: AnomalyKind::Wandering,
        method: Method::Hmm,
        denoise: 28,
        reference: reference(None, None, 0.94, 1.0, 0.017, 144.0),
        desk_band: band(0.9, Some(0.2)),
    },
    RowSpec {
        anomaly: AnomalyKind::FallWalking,
        method: Method::Rf,
        denoise: 0,
        reference: reference(Some(0.20), Some(0.64), 0.092, 0.75, 0.09, 12.2),
        desk_band: None,
    },
    RowSpec {
        anomaly: AnomalyKind::FallWalking,
        method: Method::Rf,
        denoise: 16,
        reference: reference(None, None, 0.32, 0.75, 0.02, 29.6),
        desk_band: band(0.5, None),
    },
    RowSpec {
        anomaly: AnomalyKind::FallStanding,
        method: Method::Dnb,
        denoise: 0,
        reference: reference(Some(0.83), Some(0.20), 0.13, 0.18, 0.015, 5.13),
        desk_band: None,
    },
    RowSpec {
        anomaly: AnomalyKind::FallStanding,
        method: Method::Hmm,
        denoise: 0,
        reference: reference(Some(0.66), Some(0.92), 0.17, 0.92, 0.053, 7.7),
        desk_band: None,
    },
    RowSpec {
        anomaly: AnomalyKind::FallStanding,
        method: Method::Hmm,
        denoise: 6,
        reference: reference(None, None, 0.97, 0.92, 0.0, 30.0),
        desk_band: band(0.7, None),
    },
];

impl RowSpec {
    /// Band used at `scale` over a test horizon of `days` days. Full scale
    /// allows ±0.15 sensitivity and up to five times the published false
    /// alarm rate, taking one alarm over the horizon as the floor for rows
    /// published at zero.
    pub fn band(&self, scale: Scale, days: f64) -> Option<Band> {
        match scale {
            Scale::Desk => self.desk_band,
            Scale::Full => {
                let s = self.reference.sensitivity;
                Some(Band {
                    min_sensitivity: Some(s - 0.15),
                    max_sensitivity: Some(s + 0.15),
                    max_far: Some(5.0 * self.reference.far_per_day.max(1.0 / days)),
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub spec: RowSpec,
    pub report: ScoreReport,
    /// Mean alarm length in seconds.
    pub mal_seconds: Option<f64>,
    pub band: Option<Band>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Replicate {
    pub train_seed: u64,
    pub test_seed: u64,
    pub train_events: u64,
    pub test_events: u64,
    /// True interval counts in the test data, per anomaly.
    pub test_intervals: Vec<(AnomalyKind, usize)>,
    /// This replicate's scores, aligned with [`ROWS`].
    pub scores: Vec<ScoreReport>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Reproduction {
    pub scale: Scale,
    pub seed: u64,
    pub days: u64,
    pub rate_scale: f64,
    pub replicates: Vec<Replicate>,
    pub rows: Vec<ReportRow>,
    /// Training problems that left a row without a model.
    pub notes: Vec<String>,
}

impl Reproduction {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass != Some(false))
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "anomaly",
            "method",
            "denoise",
            "true_intervals",
            "predicted_intervals",
            "raw_precision",
            "raw_recall",
            "precision",
            "sensitivity",
            "far_per_day",
            "mal_seconds",
            "ref_raw_precision",
            "ref_raw_recall",
            "ref_precision",
            "ref_sensitivity",
            "ref_far_per_day",
            "ref_mal_seconds",
            "band",
            "pass",
        ])?;
        let o = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_default();
        for r in &self.rows {
            let (s, rep, rf) = (&r.spec, &r.report, &r.spec.reference);
            out.write_record([
                s.anomaly.name().to_string(),
                s.method.name().to_string(),
                s.denoise.to_string(),
                rep.true_intervals.to_string(),
                rep.predicted_intervals.to_string(),
                o(rep.raw_precision),
                o(rep.raw_recall),
                o(rep.interval_precision),
                o(rep.sensitivity),
                format!("{:.4}", rep.far_per_day),
                o(r.mal_seconds),
                o(rf.raw_precision),
                o(rf.raw_recall),
                format!("{}", rf.interval_precision),
                format!("{}", rf.sensitivity),
                format!("{}", rf.far_per_day),
                format!("{:.1}", rf.mal_seconds),
                r.band.map(|b| b.to_string()).unwrap_or_default(),
                r.pass.map(|p| if p { "pass" } else { "FAIL" }.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

impl fmt::Display for Reproduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scale {}: {} days train + {} days test, anomaly rates x{}, {} replicate(s) from master seed {}",
            self.scale.name(),
            self.days,
            self.days,
            self.rate_scale,
            self.replicates.len(),
            self.seed
        )?;
        writeln!(
            f,
            "{:<14} {:<4} {:>4} {:>5} {:>7} {:>6} {:>6} {:>6} {:>6} {:>9} {:>10} | {:>5} {:>7} {:>9}  result",
            "anomaly", "meth", "dn", "true", "pred", "rawP", "rawR", "prec", "sens", "FAR/day", "MAL s", "sens", "FAR", "MAL s"
        )?;
        let o = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        for r in &self.rows {
            let (s, rep, rf) = (&r.spec, &r.report, &r.spec.reference);
            let verdict = match (r.pass, r.band) {
                (Some(true), Some(b)) => format!("pass ({b})"),
                (Some(false), Some(b)) => format!("FAIL ({b})"),
                _ => String::new(),
            };
            writeln!(
                f,
                "{:<14} {:<4} {:>4} {:>5} {:>7} {:>6} {:>6} {:>6} {:>6} {:>9.4} {:>10} | {:>5} {:>7} {:>9}  {verdict}",
                s.anomaly.name(),
                s.method.to_string(),
                s.denoise,
                rep.true_intervals,
                rep.predicted_intervals,
                o(rep.raw_precision),
                o(rep.raw_recall),
                o(rep.interval_precision),
                o(rep.sensitivity),
                rep.far_per_day,
                r.mal_seconds.map(|v| format!("{v:.1}")).unwrap_or_else(|| "-".into()),
                rf.sensitivity,
                rf.far_per_day,
                format!("{:.1}", rf.mal_seconds),
            )?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReproduceOptions {
    pub scale: Scale,
    pub seed: u64,
    /// Overrides the scale's number of replicates.
    pub replicates: Option<u64>,
    /// Overrides the scale's horizon.
    pub days: Option<u64>,
    pub train: TrainOptions,
    /// Simulation settings other than seed, horizon and rates.
    pub base: SimConfig,
}

impl ReproduceOptions {
    pub fn new(scale: Scale, seed: u64) -> Self {
        Self { scale, seed, replicates: None, days: None, train: TrainOptions::default(), base: SimConfig::default_with(seed, 1) }
    }
}

/// Seeds of replicate `r`: train and test data are independent draws
/// derived from the master seed.
pub fn replicate_seeds(master: u64, r: u64) -> (u64, u64) {
    (derive_seed(master, Stream::Derived, 2 * r), derive_seed(master, Stream::Derived, 2 * r + 1))
}

/// Simulates train and test data for every replicate, trains every
/// pairing on the former and scores it on the latter, pooling the counts
/// across replicates. `progress` receives one line per stage.
pub fn reproduce(opts: &ReproduceOptions, mut progress: impl FnMut(&str)) -> Result<Reproduction> {
    let days = opts.days.unwrap_or(opts.scale.days());
    let reps = opts.replicates.unwrap_or(opts.scale.replicates());
    if reps == 0 {
        return Err(Error::InvalidParameter("at least one replicate is needed".into()));
    }
    let sim = |seed: u64| {
        let mut cfg = opts.base.clone();
        cfg.seed = seed;
        cfg.horizon_days = days;
        cfg.anomalies.rate_scale = opts.scale.rate_scale();
        cfg
    };
    let mut raw = vec![ScoreCounts::default(); ROWS.len()];
    let mut clean = vec![ScoreCounts::default(); ROWS.len()];
    let mut missing = vec![false; ROWS.len()];
    let mut notes = Vec::new();
    let mut replicates = Vec::new();
    for r in 0..reps {
        let start = Instant::now();
        let (train_seed, test_seed) = replicate_seeds(opts.seed, r);
        let mut forest = opts.train.forest;
        forest.seed = derive_seed(train_seed, Stream::Tree, 0);
        let topts = TrainOptions { forest, threshold_fallback: true, ..opts.train };

        progress(&format!("replicate {r}: simulating {days} training days (seed {train_seed})"));
        let (train_ds, _) = Dataset::simulate(&sim(train_seed))?;
        let mut models = Vec::new();
        for &(kind, method) in &PAIRINGS {
            let t = Instant::now();
            match train(&train_ds, kind, method, &topts) {
                Ok((m, log)) => {
                    for l in log.iter().filter(|l| l.contains("falls back")) {
                        notes.push(format!("replicate {r}: {kind}/{}: {l}", method.name()));
                    }
                    progress(&format!("replicate {r}: trained {kind}/{} in {:.1} s", method.name(), t.elapsed().as_secs_f64()));
                    models.push(Some(m));
                }
                Err(e @ (Error::NoPositives(_) | Error::SingleClass)) => {
                    notes.push(format!("replicate {r}: {kind}/{} not trained: {e}", method.name()));
                    models.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        let train_events = train_ds.events.len() as u64;
        drop(train_ds);

        progress(&format!("replicate {r}: simulating {days} test days (seed {test_seed})"));
        let (test_ds, _) = Dataset::simulate(&sim(test_seed))?;
        let mut test_intervals = Vec::new();
        let mut scores = vec![None; ROWS.len()];
        for kind in AnomalyKind::ALL {
            test_intervals.push((kind, test_ds.true_intervals(kind)?));
        }
        for (&(kind, method), model) in PAIRINGS.iter().zip(&models) {
            let t = Instant::now();
            let truth = test_ds.labels(kind)?;
            let pred = match model {
                Some(m) => detect(&test_ds, m)?,
                None => LabelTrack::zeros(truth.unit, truth.len),
            };
            for (i, row) in ROWS.iter().enumerate().filter(|(_, s)| s.anomaly == kind && s.method == method) {
                missing[i] |= model.is_none();
                let r = ScoreCounts::from_tracks(&truth, &pred, days as f64)?;
                let c = ScoreCounts::from_tracks(&truth, &denoise(&pred, row.denoise), days as f64)?;
                scores[i] = Some(c.report_with_raw(Some(&r), row.denoise));
                raw[i].add(&r);
                clean[i].add(&c);
            }
            progress(&format!("replicate {r}: detected {kind}/{} in {:.1} s", method.name(), t.elapsed().as_secs_f64()));
        }
        replicates.push(Replicate {
            train_seed,
            test_seed,
            train_events,
            test_events: test_ds.events.len() as u64,
            test_intervals,
            scores: scores.into_iter().map(|s| s.expect("every row belongs to a pairing")).collect(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let test_days = (days * reps) as f64;
    let rows = ROWS
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let report = clean[i].report_with_raw(Some(&raw[i]), spec.denoise);
            let band = spec.band(opts.scale, test_days);
            let pass = band.map(|b| !missing[i] && b.check(&report));
            let mal_seconds = report.mal.map(|m| m * spec.anomaly.unit_seconds() as f64);
            ReportRow { spec: *spec, report, mal_seconds, band, pass }
        })
        .collect();
    Ok(Reproduction { scale: opts.scale, seed: opts.seed, days, rate_scale: opts.scale.rate_scale(), replicates, rows, notes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairings_follow_the_table() {
        assert!(check_pairing(AnomalyKind::SemiBedridden, Method::St).is_ok());
        let e = check_pairing(AnomalyKind::Forgetting, Method::Hmm).unwrap_err();
        let msg = e.to_string();
        assert!(matches!(e, Error::UnsupportedPairing { .. }));
        assert!(msg.contains("forgetting/dt") && msg.contains("fall-walking/rf"), "{msg}");
        for row in ROWS {
            assert!(check_pairing(row.anomaly, row.method).is_ok());
        }
    }

    #[test]
    fn replicate_seeds_are_distinct() {
        let mut all: Vec<u64> = (0..5).flat_map(|r| {
            let (a, b) = replicate_seeds(1, r);
            [a, b]
        }).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn full_band_has_a_floor() {
        let row = ROWS[0];
        let b = row.band(Scale::Full, 3240.0).unwrap();
        assert!((b.max_far.unwrap() - 5.0 / 3240.0).abs() < 1e-12);
        assert_eq!(b.min_sensitivity, Some(0.85));
    }
}
