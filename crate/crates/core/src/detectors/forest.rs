//! Random forest over nonresponse durations for falls while walking.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand_distr::{Distribution, Poisson};

use super::cart::{Binned, Node, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::pipeline::nrd::{NrdMatrix, NRD_CAP};
use crate::pipeline::{IntervalSet, LabelTrack};
use crate::rng::{substream, Stream};
use crate::time::SECONDS_PER_DAY;

#[derive(Debug, Clone, Copy)]
pub struct ForestParams {
    pub trees: usize,
    /// Training rows are the seconds within this many days of a fall.
    pub window_days: u64,
    pub min_samples_split: f64,
    /// Features tried per split; `None` uses the square root of the count.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { trees: 100, window_days: 3, min_samples_split: 5.0, max_features: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub motion_ids: Vec<usize>,
    pub trees: Vec<Tree>,
}

/// Bin edges for durations: every second up to 160 s, then 95 steps
/// spaced evenly on a log scale towards one day.
pub fn nrd_edges() -> Vec<f64> {
    let mut e: Vec<f64> = (0..160).map(|i| i as f64 + 0.5).collect();
    let ratio = (NRD_CAP as f64 / 160.0).ln() / 95.0;
    for k in 0..95 {
        let v = (160.0 * (ratio * k as f64).exp()).floor() + 0.5;
        if v > *e.last().unwrap() {
            e.push(v);
        }
    }
    e
}

fn bin_table(edges: &[f64]) -> Vec<u8> {
    (0..=NRD_CAP).map(|v| Binned::bin_of(edges, v as f64)).collect()
}

/// Seconds within `days` of any positive second.
fn training_windows(labels: &LabelTrack, days: u64) -> IntervalSet {
    let pad = days * SECONDS_PER_DAY;
    let spans = labels.intervals.iter().map(|(s, e)| (s.saturating_sub(pad), (e + pad).min(labels.len - 1))).collect();
    IntervalSet::from_unsorted(spans)
}

/// Distinct binned rows inside the training windows with per-class counts.
pub fn collect_rows(nrd: &NrdMatrix, labels: &LabelTrack, days: u64) -> Binned {
    let edges = nrd_edges();
    let table = bin_table(&edges);
    let f = nrd.features();
    let mut index: HashMap<Box<[u8]>, usize> = HashMap::new();
    let mut bins = Vec::new();
    let mut weights: Vec<[f64; 2]> = Vec::new();
    let mut key = vec![0u8; f];
    for (a, b) in training_windows(labels, days).iter() {
        let mut rows = nrd.rows(a, b + 1);
        while let Some((j, row)) = rows.next_row() {
            for (k, &v) in row.iter().enumerate() {
                key[k] = table[v as usize];
            }
            let y = labels.get(j) as usize;
            let i = *index.entry(key.clone().into_boxed_slice()).or_insert_with(|| {
                bins.extend_from_slice(&key);
                weights.push([0.0; 2]);
                weights.len() - 1
            });
            weights[i][y] += 1.0;
        }
    }
    Binned { features: f, edges: vec![edges; f], bins, weights }
}

pub fn fit_forest(nrd: &NrdMatrix, labels: &LabelTrack, params: &ForestParams) -> Result<ForestModel> {
    if labels.unit != 1 || labels.len != nrd.seconds {
        return Err(Error::TrackMismatch(format!("labels need unit 1 s and length {}", nrd.seconds)));
    }
    if labels.intervals.is_empty() {
        return Err(Error::NoPositives("the fall detector".into()));
    }
    let data = collect_rows(nrd, labels, params.window_days);
    Ok(fit_forest_binned(&data, nrd.motion_ids.clone(), params))
}

/// Each tree sees a Poisson(1) bootstrap of every original row, which is
/// a Poisson draw per distinct row and class.
pub fn fit_forest_binned(data: &Binned, motion_ids: Vec<usize>, params: &ForestParams) -> ForestModel {
    let mtry = params.max_features.unwrap_or_else(|| (data.features as f64).sqrt().round().max(1.0) as usize);
    let tp = TreeParams { min_samples_split: params.min_samples_split, max_features: Some(mtry), max_depth: 64 };
    let trees = (0..params.trees)
        .map(|t| {
            let mut rng = substream(params.seed, Stream::Tree, t as u64);
            let w: Vec<[f64; 2]> = data
                .weights
                .iter()
                .map(|w| {
                    let mut out = [0.0; 2];
                    for c in 0..2 {
                        if w[c] > 0.0 {
                            out[c] = Poisson::new(w[c]).expect("positive mean").sample(&mut rng);
                        }
                    }
                    out
                })
                .collect();
            Tree::fit(data, &w, &tp, &mut rng)
        })
        .collect();
    ForestModel { motion_ids, trees }
}

#[derive(Clone, Copy)]
struct RNode {
    f: u32,
    k: u32,
    left: u32,
    right: u32,
}

const LEAF: u32 = u32::MAX;

/// Forest with thresholds replaced by per-feature ranks.
struct RankForest {
    thresholds: Vec<Vec<u32>>,
    offsets: Vec<usize>,
    trees: Vec<Vec<RNode>>,
}

impl RankForest {
    fn new(model: &ForestModel) -> Self {
        let f = model.motion_ids.len();
        let mut thresholds: Vec<Vec<u32>> = vec![Vec::new(); f];
        for t in &model.trees {
            for n in &t.nodes {
                if let Node::Split { feature, threshold, .. } = n {
                    thresholds[*feature].push(threshold.floor().max(0.0) as u32);
                }
            }
        }
        for th in &mut thresholds {
            th.sort_unstable();
            th.dedup();
        }
        let mut offsets = vec![0; f + 1];
        for i in 0..f {
            offsets[i + 1] = offsets[i] + thresholds[i].len();
        }
        let trees = model
            .trees
            .iter()
            .map(|t| {
                t.nodes
                    .iter()
                    .map(|n| match n {
                        Node::Leaf { class, .. } => RNode { f: LEAF, k: 0, left: *class as u32, right: 0 },
                        Node::Split { feature, threshold, left, right } => {
                            let th = threshold.floor().max(0.0) as u32;
                            let k = thresholds[*feature].binary_search(&th).expect("collected") as u32;
                            RNode { f: *feature as u32, k, left: *left as u32, right: *right as u32 }
                        }
                    })
                    .collect()
            })
            .collect();
        Self { thresholds, offsets, trees }
    }

    /// Leaf class and the `(feature, rank index)` tests along the path.
    fn eval(&self, t: usize, ranks: &[u32], path: &mut Vec<(u32, u32)>) -> bool {
        path.clear();
        let nodes = &self.trees[t];
        let mut i = 0;
        loop {
            let n = nodes[i];
            if n.f == LEAF {
                return n.left == 1;
            }
            path.push((n.f, n.k));
            i = if ranks[n.f as usize] > n.k { n.right } else { n.left } as usize;
        }
    }
}

/// Per `(feature, threshold)` set of trees whose current path tests it.
struct DepBits {
    words: usize,
    bits: Vec<u64>,
}

impl DepBits {
    fn slot(&mut self, off: usize) -> &mut [u64] {
        &mut self.bits[off * self.words..(off + 1) * self.words]
    }
}

impl ForestModel {
    pub fn features(&self) -> usize {
        self.motion_ids.len()
    }

    pub fn predict_row(&self, x: &[f64]) -> bool {
        let votes = self.trees.iter().filter(|t| t.predict(x)).count();
        2 * votes > self.trees.len()
    }

    /// Per-second replay, for checking [`ForestModel::predict`].
    pub fn predict_naive(&self, nrd: &NrdMatrix) -> LabelTrack {
        let mut bits = Vec::with_capacity(nrd.seconds as usize);
        let mut rows = nrd.rows(0, nrd.seconds);
        let mut x = vec![0.0; nrd.features()];
        while let Some((_, row)) = rows.next_row() {
            for (a, &b) in x.iter_mut().zip(row) {
                *a = b as f64;
            }
            bits.push(self.predict_row(&x));
        }
        LabelTrack::from_bits(1, &bits)
    }

    /// Prediction for every second. Work is done only when a duration
    /// restarts or crosses a threshold used by some tree, and only for
    /// the trees whose current path tests that threshold.
    pub fn predict(&self, nrd: &NrdMatrix) -> Result<LabelTrack> {
        if nrd.motion_ids != self.motion_ids {
            return Err(Error::DimensionMismatch { expected: self.motion_ids.len(), got: nrd.features() });
        }
        let rf = RankForest::new(self);
        let n = self.trees.len();
        let nf = self.features();
        let words = n.div_ceil(64).max(1);
        let mut dep = DepBits { words, bits: vec![0; rf.offsets[nf].max(1) * words] };
        let mut ranks = vec![0u32; nf];
        let mut paths: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        let mut class = vec![false; n];
        let mut votes = 0usize;
        for t in 0..n {
            let mut p = Vec::new();
            class[t] = rf.eval(t, &ranks, &mut p);
            votes += class[t] as usize;
            for &(f, k) in &p {
                dep.slot(rf.offsets[f as usize] + k as usize)[t / 64] |= 1 << (t % 64);
            }
            paths[t] = p;
        }

        // (time, feature, kind, aux): kind 0 restart with span index aux,
        // kind 1 threshold crossing tagged with version aux, kind 2 the
        // count dropping to zero, tagged with version aux.
        let mut heap: BinaryHeap<Reverse<(u64, u32, u8, u32)>> = BinaryHeap::new();
        let mut version = vec![0u32; nf];
        let mut last_end = vec![0u64; nf];
        let mut stop = vec![0u64; nf];
        let crossing = |f: usize, r: u32, end: u64, stop: u64| -> Option<u64> {
            let th = rf.thresholds[f].get(r as usize)?;
            let t = end + *th as u64 + 1;
            (*th < NRD_CAP && t < stop).then_some(t)
        };
        for f in 0..nf {
            if let Some(s) = nrd.spans[f].first() {
                heap.push(Reverse((s.first, f as u32, 0, 0)));
            }
        }

        let mut out = IntervalSet::new();
        let mut pred = 2 * votes > n;
        let mut since = 0u64;
        let mut affected = vec![0u64; words];
        let mut scratch = Vec::new();
        while let Some(&Reverse((j, ..))) = heap.peek() {
            if j >= nrd.seconds {
                break;
            }
            affected.iter_mut().for_each(|w| *w = 0);
            while let Some(&Reverse((tj, f, kind, aux))) = heap.peek() {
                if tj != j {
                    break;
                }
                heap.pop();
                let fi = f as usize;
                let old = ranks[fi];
                let mut drop_to_zero = |affected: &mut [u64], ranks: &mut [u32]| {
                    for k in 0..old {
                        for (a, b) in affected.iter_mut().zip(dep.slot(rf.offsets[fi] + k as usize).iter()) {
                            *a |= *b;
                        }
                    }
                    ranks[fi] = 0;
                };
                if kind == 0 {
                    drop_to_zero(&mut affected, &mut ranks);
                    let span = nrd.spans[fi][aux as usize];
                    version[fi] += 1;
                    last_end[fi] = span.last;
                    stop[fi] = span.stop;
                    if let Some(t) = crossing(fi, 0, span.last, span.stop) {
                        heap.push(Reverse((t, f, 1, version[fi])));
                    }
                    let next = nrd.spans[fi].get(aux as usize + 1);
                    if span.stop < next.map_or(nrd.seconds, |s| s.first) {
                        heap.push(Reverse((span.stop, f, 2, version[fi])));
                    }
                    if let Some(s) = next {
                        heap.push(Reverse((s.first, f, 0, aux + 1)));
                    }
                } else if aux == version[fi] {
                    if kind == 2 {
                        drop_to_zero(&mut affected, &mut ranks);
                        version[fi] += 1;
                    } else {
                        for (a, b) in affected.iter_mut().zip(dep.slot(rf.offsets[fi] + old as usize).iter()) {
                            *a |= *b;
                        }
                        ranks[fi] = old + 1;
                        if let Some(t) = crossing(fi, old + 1, last_end[fi], stop[fi]) {
                            heap.push(Reverse((t, f, 1, aux)));
                        }
                    }
                }
            }
            for (w, &word) in affected.iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let t = w * 64 + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    for &(f, k) in &paths[t] {
                        dep.slot(rf.offsets[f as usize] + k as usize)[t / 64] &= !(1 << (t % 64));
                    }
                    let c = rf.eval(t, &ranks, &mut scratch);
                    for &(f, k) in &scratch {
                        dep.slot(rf.offsets[f as usize] + k as usize)[t / 64] |= 1 << (t % 64);
                    }
                    std::mem::swap(&mut paths[t], &mut scratch);
                    if c != class[t] {
                        class[t] = c;
                        if c {
                            votes += 1;
                        } else {
                            votes -= 1;
                        }
                    }
                }
            }
            let now = 2 * votes > n;
            if now != pred {
                if pred && j > since {
                    out.push(since, j - 1);
                }
                pred = now;
                since = j;
            }
        }
        if pred && nrd.seconds > since {
            out.push(since, nrd.seconds - 1);
        }
        Ok(LabelTrack { unit: 1, len: nrd.seconds, intervals: out })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{binarize, nonresponse_duration};
    use crate::plan::default_plan;

    #[test]
    fn edges_are_increasing() {
        let e = nrd_edges();
        assert_eq!(e.len(), 255);
        assert!(e.windows(2).all(|w| w[0] < w[1]));
        assert!(*e.last().unwrap() < NRD_CAP as f64);
    }

    #[test]
    fn no_falls_is_an_error() {
        let (_, layout) = default_plan();
        let m = binarize(&[], layout.len(), 1000).unwrap();
        let nrd = nonresponse_duration(&m, &layout).unwrap();
        let l = LabelTrack::zeros(1, 1000);
        assert!(matches!(fit_forest(&nrd, &l, &ForestParams::default()), Err(Error::NoPositives(_))));
    }

    /// One sensor fires every 40 s; seconds where its duration exceeds
    /// 25 s are positive.
    fn separable() -> (NrdMatrix, LabelTrack) {
        let (_, layout) = default_plan();
        let mut ev = Vec::new();
        for k in 0..200u64 {
            ev.push(crate::sensors::SensorEvent::on(k * 400 + 5, 3));
            ev.push(crate::sensors::SensorEvent::off(k * 400 + 8, 3));
        }
        let m = binarize(&ev, layout.len(), 80_000).unwrap();
        let nrd = nonresponse_duration(&m, &layout).unwrap();
        let l3 = nrd.local_index(3).unwrap();
        let bits: Vec<bool> = (0..80_000).map(|j| nrd.value(l3, j) > 25).collect();
        (nrd, LabelTrack::from_bits(1, &bits))
    }

    #[test]
    fn separable_durations_are_recovered() {
        let (nrd, labels) = separable();
        let model = fit_forest(&nrd, &labels, &ForestParams { trees: 15, ..Default::default() }).unwrap();
        let pred = model.predict(&nrd).unwrap();
        assert_eq!(pred.intervals, labels.intervals);
    }

    #[test]
    fn constant_motion_predicts_nothing() {
        let (nrd, labels) = separable();
        let model = fit_forest(&nrd, &labels, &ForestParams { trees: 5, ..Default::default() }).unwrap();
        let (_, layout) = default_plan();
        let ids: Vec<usize> = layout.motion_ids();
        let m = crate::pipeline::DataMatrix {
            sensors: layout.len(),
            seconds: 5000,
            runs: vec![crate::pipeline::matrix::Run { start: 0, end: 5000, mask: crate::pipeline::SensorSet::from_ids(ids) }],
        };
        let busy = nonresponse_duration(&m, &layout).unwrap();
        assert!(model.predict(&busy).unwrap().intervals.is_empty());
    }

    /// Short pulses on random motion sensors with gaps of up to a minute.
    fn random_pulses(seed: u64, ids: &[usize], seconds: u64) -> Vec<crate::sensors::SensorEvent> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut ev = Vec::new();
        let mut t = 0;
        loop {
            t += rng.random_range(1..600);
            if t + 3 >= seconds * 10 {
                break;
            }
            let id = ids[rng.random_range(0..ids.len())];
            ev.push(crate::sensors::SensorEvent::on(t, id));
            ev.push(crate::sensors::SensorEvent::off(t + 2, id));
            t += 2;
        }
        ev
    }

    #[test]
    fn event_driven_matches_per_second() {
        let (_, layout) = default_plan();
        for seed in 0..4 {
            let ev = random_pulses(seed, &layout.motion_ids(), 40_000);
            let m = binarize(&ev, layout.len(), 40_000).unwrap();
            let nrd = nonresponse_duration(&m, &layout).unwrap();
            let bits: Vec<bool> = (0..40_000).map(|j| (0..12).any(|l| (20..40).contains(&nrd.value(l, j)))).collect();
            assert!(bits.iter().any(|&b| b));
            let labels = LabelTrack::from_bits(1, &bits);
            let model = fit_forest(&nrd, &labels, &ForestParams { trees: 12, seed, ..Default::default() }).unwrap();
            let naive = model.predict_naive(&nrd);
            assert!(naive.positives() > 0);
            assert_eq!(model.predict(&nrd).unwrap(), naive);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (nrd, labels) = separable();
        let p = ForestParams { trees: 4, seed: 9, ..Default::default() };
        assert_eq!(fit_forest(&nrd, &labels, &p).unwrap(), fit_forest(&nrd, &labels, &p).unwrap());
    }
}
