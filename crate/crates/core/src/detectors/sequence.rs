//! Two-state sequence labelers over data-matrix columns: dynamic naive
//! Bayes (state-independent transitions) and a hidden Markov model, both
//! with independent Bernoulli emissions per sensor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::pipeline::{Columns, IntervalSet, LabelTrack, SensorSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dnb,
    Hmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Decoding {
    #[default]
    Posterior,
    Viterbi,
}

/// Seconds per checkpoint block in forward-backward.
const BLOCK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceModel<T: Real> {
    pub variant: Variant,
    pub sensors: usize,
    pub pi: [T; 2],
    /// Row-stochastic, `a[i][j] = P(next = j | now = i)`.
    pub a: [[T; 2]; 2],
    /// `b[s][z] = P(sensor s on | state z)`.
    pub b: Vec<[T; 2]>,
}

/// Sufficient statistics from a labeled sequence.
#[derive(Debug, Clone, Default)]
struct Counts {
    len: u64,
    state: [u64; 2],
    on: Vec<[u64; 2]>,
    trans: [[u64; 2]; 2],
}

/// Splits constant column segments at label boundaries.
fn labeled_pieces(cols: &(impl Columns + ?Sized), labels: &LabelTrack, mut f: impl FnMut(u64, u64, SensorSet, bool)) {
    let iv = labels.intervals.as_slice();
    let mut c = 0;
    for (a, b, mask) in cols.segments_from(0) {
        let mut at = a;
        while at < b {
            while c < iv.len() && iv[c].1 < at {
                c += 1;
            }
            let (z, until) = match iv.get(c) {
                Some(&(s, e)) if s <= at => (true, (e + 1).min(b)),
                Some(&(s, _)) => (false, s.min(b)),
                None => (false, b),
            };
            f(at, until, mask, z);
            at = until;
        }
    }
}

fn counts(cols: &(impl Columns + ?Sized), labels: &LabelTrack, sensors: usize) -> Counts {
    let mut k = Counts { len: cols.len(), on: vec![[0; 2]; sensors], ..Default::default() };
    labeled_pieces(cols, labels, |a, b, mask, z| {
        let n = b - a;
        k.state[z as usize] += n;
        for s in mask.iter().filter(|&s| s < sensors) {
            k.on[s][z as usize] += n;
        }
    });
    let t = k.len;
    let last = t.checked_sub(1).is_some_and(|l| labels.get(l)) as u64;
    let first = labels.get(0) as u64;
    let runs = labels.intervals.len() as u64;
    let n10 = runs - last;
    let n01 = runs - first;
    let n11 = k.state[1] - last - n10;
    let n00 = t.saturating_sub(1) - n01 - n10 - n11;
    k.trans = [[n00, n01], [n10, n11]];
    k
}

/// Supervised fit with add-one smoothing.
pub fn fit_sequence<T: Real>(cols: &(impl Columns + ?Sized), labels: &LabelTrack, variant: Variant) -> Result<SequenceModel<T>> {
    fit_sequence_smoothed(cols, labels, variant, 1.0)
}

pub fn fit_sequence_smoothed<T: Real>(
    cols: &(impl Columns + ?Sized),
    labels: &LabelTrack,
    variant: Variant,
    alpha: f64,
) -> Result<SequenceModel<T>> {
    if labels.unit != 1 || labels.len != cols.len() {
        return Err(Error::TrackMismatch(format!("labels need unit 1 s and length {}", cols.len())));
    }
    let pos = labels.positives();
    if pos == 0 || pos == labels.len {
        return Err(Error::SingleClass);
    }
    let sensors = cols.sensors();
    let k = counts(cols, labels, sensors);
    let frac = |num: u64, den: u64| T::of((num as f64 + alpha) / (den as f64 + 2.0 * alpha));
    let pi = [frac(k.state[0], k.len), frac(k.state[1], k.len)];
    let a = match variant {
        Variant::Hmm => {
            let row = |i: usize| {
                let n = k.trans[i][0] + k.trans[i][1];
                [frac(k.trans[i][0], n), frac(k.trans[i][1], n)]
            };
            [row(0), row(1)]
        }
        Variant::Dnb => [pi, pi],
    };
    let b = k.on.iter().map(|o| [frac(o[0], k.state[0]), frac(o[1], k.state[1])]).collect();
    Ok(SequenceModel { variant, sensors, pi, a, b })
}

/// Per-state log emission of a column, cached per mask.
struct Emission<T> {
    base: [T; 2],
    delta: Vec<[T; 2]>,
}

impl<T: Real> Emission<T> {
    fn new(m: &SequenceModel<T>) -> Self {
        let mut base = [T::zero(); 2];
        let mut delta = Vec::with_capacity(m.sensors);
        for p in &m.b {
            let mut d = [T::zero(); 2];
            for z in 0..2 {
                base[z] = base[z] + (T::one() - p[z]).ln();
                d[z] = p[z].ln() - (T::one() - p[z]).ln();
            }
            delta.push(d);
        }
        Self { base, delta }
    }

    fn log(&self, mask: SensorSet) -> [T; 2] {
        let mut e = self.base;
        for s in mask.iter().filter(|&s| s < self.delta.len()) {
            e[0] = e[0] + self.delta[s][0];
            e[1] = e[1] + self.delta[s][1];
        }
        e
    }

    /// Emission scaled so the larger state is 1.
    fn scaled(&self, mask: SensorSet) -> [T; 2] {
        let e = self.log(mask);
        let m = e[0].max(e[1]);
        [(e[0] - m).exp(), (e[1] - m).exp()]
    }
}

fn normalize<T: Real>(v: [T; 2]) -> ([T; 2], T) {
    let s = v[0] + v[1];
    ([v[0] / s, v[1] / s], s)
}

impl<T: Real> SequenceModel<T> {
    fn check(&self, cols: &(impl Columns + ?Sized)) -> Result<()> {
        if cols.sensors() > self.sensors {
            return Err(Error::DimensionMismatch { expected: self.sensors, got: cols.sensors() });
        }
        Ok(())
    }

    fn step(&self, prev: [T; 2], e: [T; 2]) -> [T; 2] {
        [
            (prev[0] * self.a[0][0] + prev[1] * self.a[1][0]) * e[0],
            (prev[0] * self.a[0][1] + prev[1] * self.a[1][1]) * e[1],
        ]
    }

    fn back(&self, beta: [T; 2], e: [T; 2]) -> [T; 2] {
        let w = [e[0] * beta[0], e[1] * beta[1]];
        [self.a[0][0] * w[0] + self.a[0][1] * w[1], self.a[1][0] * w[0] + self.a[1][1] * w[1]]
    }

    /// Dense posteriors `P(state_t | all columns)`, for short sequences.
    pub fn posteriors(&self, cols: &(impl Columns + ?Sized)) -> Result<Vec<[T; 2]>> {
        self.check(cols)?;
        let em = Emission::new(self);
        let mut e = Vec::with_capacity(cols.len() as usize);
        for (a, b, mask) in cols.segments_from(0) {
            let s = em.scaled(mask);
            e.extend((a..b).map(|_| s));
        }
        let n = e.len();
        let mut alpha = Vec::with_capacity(n);
        for t in 0..n {
            let raw = if t == 0 { [self.pi[0] * e[0][0], self.pi[1] * e[0][1]] } else { self.step(alpha[t - 1], e[t]) };
            alpha.push(normalize(raw).0);
        }
        let mut out = vec![[T::zero(); 2]; n];
        let mut beta = [T::one(); 2];
        for t in (0..n).rev() {
            if t + 1 < n {
                beta = normalize(self.back(beta, e[t + 1])).0;
            }
            out[t] = normalize([alpha[t][0] * beta[0], alpha[t][1] * beta[1]]).0;
        }
        Ok(out)
    }

    /// `log P(columns)` under the model.
    pub fn log_likelihood(&self, cols: &(impl Columns + ?Sized)) -> Result<T> {
        self.check(cols)?;
        let em = Emission::new(self);
        let mut total = T::zero();
        let mut alpha: Option<[T; 2]> = None;
        for (a, b, mask) in cols.segments_from(0) {
            let l = em.log(mask);
            let m = l[0].max(l[1]);
            let e = [(l[0] - m).exp(), (l[1] - m).exp()];
            for _ in a..b {
                let raw = match alpha {
                    None => [self.pi[0] * e[0], self.pi[1] * e[1]],
                    Some(p) => self.step(p, e),
                };
                let (n, s) = normalize(raw);
                total = total + s.ln() + m;
                alpha = Some(n);
            }
        }
        Ok(total)
    }

    /// `log P(columns, labels)` with the states fixed to the labels.
    pub fn complete_log_likelihood(&self, cols: &(impl Columns + ?Sized), labels: &LabelTrack) -> Result<T> {
        self.check(cols)?;
        let em = Emission::new(self);
        let k = counts(cols, labels, self.sensors);
        let mut total = T::zero();
        labeled_pieces(cols, labels, |a, b, mask, z| {
            total = total + em.log(mask)[z as usize] * T::of((b - a) as f64);
        });
        total = total + self.pi[labels.get(0) as usize].ln();
        for i in 0..2 {
            for j in 0..2 {
                total = total + self.a[i][j].ln() * T::of(k.trans[i][j] as f64);
            }
        }
        Ok(total)
    }

    pub fn predict(&self, cols: &(impl Columns + ?Sized), decoding: Decoding) -> Result<LabelTrack> {
        match decoding {
            Decoding::Posterior => self.predict_blocked(cols, BLOCK),
            Decoding::Viterbi => self.viterbi(cols),
        }
    }

    /// Posterior decoding with forward checkpoints every `block` steps so
    /// memory stays bounded by the block size. Ties go to state 0.
    pub fn predict_blocked(&self, cols: &(impl Columns + ?Sized), block: usize) -> Result<LabelTrack> {
        self.check(cols)?;
        let n = cols.len() as usize;
        let em = Emission::new(self);
        let mut checkpoints: Vec<[T; 2]> = Vec::with_capacity(n / block + 1);
        let mut alpha = [T::zero(); 2];
        let mut t = 0usize;
        for (a, b, mask) in cols.segments_from(0) {
            let e = em.scaled(mask);
            for _ in a..b {
                let raw = if t == 0 { [self.pi[0] * e[0], self.pi[1] * e[1]] } else { self.step(alpha, e) };
                if t.is_multiple_of(block) {
                    checkpoints.push(raw);
                }
                alpha = normalize(raw).0;
                t += 1;
            }
        }

        let mut runs: Vec<(u64, u64)> = Vec::new();
        let mut open: Option<u64> = None;
        let mut beta = [T::one(); 2];
        let mut next_e: Option<[T; 2]> = None;
        let mut em_buf = vec![[T::zero(); 2]; block.min(n.max(1))];
        let mut al_buf = vec![[T::zero(); 2]; block.min(n.max(1))];
        for (k, cp) in checkpoints.iter().enumerate().rev() {
            let lo = k * block;
            let hi = (lo + block).min(n);
            let mut i = lo;
            for (a, b, mask) in cols.segments_from(lo as u64) {
                let e = em.scaled(mask);
                while (i as u64) < b.min(hi as u64) && (i as u64) >= a {
                    em_buf[i - lo] = e;
                    i += 1;
                }
                if i >= hi {
                    break;
                }
            }
            al_buf[0] = normalize(*cp).0;
            for t in lo + 1..hi {
                al_buf[t - lo] = normalize(self.step(al_buf[t - lo - 1], em_buf[t - lo])).0;
            }
            for t in (lo..hi).rev() {
                if let Some(e) = next_e {
                    beta = normalize(self.back(beta, e)).0;
                }
                let al = al_buf[t - lo];
                let pos = al[1] * beta[1] > al[0] * beta[0];
                match (pos, open) {
                    (true, None) => open = Some(t as u64),
                    (false, Some(end)) => {
                        runs.push((t as u64 + 1, end));
                        open = None;
                    }
                    _ => {}
                }
                next_e = Some(em_buf[t - lo]);
            }
        }
        if let Some(end) = open {
            runs.push((0, end));
        }
        runs.reverse();
        let mut set = IntervalSet::new();
        for (s, e) in runs {
            set.push(s, e);
        }
        Ok(LabelTrack { unit: 1, len: n as u64, intervals: set })
    }

    /// Most likely state path; ties prefer state 0.
    pub fn viterbi(&self, cols: &(impl Columns + ?Sized)) -> Result<LabelTrack> {
        self.check(cols)?;
        let n = cols.len() as usize;
        let em = Emission::new(self);
        let la = [[self.a[0][0].ln(), self.a[0][1].ln()], [self.a[1][0].ln(), self.a[1][1].ln()]];
        // Two back-pointer bits per step, four steps per byte.
        let mut ptr = vec![0u8; n.div_ceil(4)];
        let mut delta = [T::zero(); 2];
        let mut t = 0usize;
        for (a, b, mask) in cols.segments_from(0) {
            let e = em.log(mask);
            for _ in a..b {
                if t == 0 {
                    delta = [self.pi[0].ln() + e[0], self.pi[1].ln() + e[1]];
                } else {
                    let mut next = [T::zero(); 2];
                    for j in 0..2 {
                        let from0 = delta[0] + la[0][j];
                        let from1 = delta[1] + la[1][j];
                        let arg = (from1 > from0) as u8;
                        ptr[t / 4] |= arg << ((t % 4) * 2 + j);
                        next[j] = from0.max(from1) + e[j];
                    }
                    let m = next[0].max(next[1]);
                    delta = [next[0] - m, next[1] - m];
                }
                t += 1;
            }
        }
        let mut bits = vec![false; n];
        if n > 0 {
            let mut z = (delta[1] > delta[0]) as usize;
            for t in (0..n).rev() {
                bits[t] = z == 1;
                if t > 0 {
                    z = ((ptr[t / 4] >> ((t % 4) * 2 + z)) & 1) as usize;
                }
            }
        }
        Ok(LabelTrack::from_bits(1, &bits))
    }
}
