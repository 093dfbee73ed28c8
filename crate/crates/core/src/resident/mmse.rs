use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmseParams {
    pub m0: f64,
    /// Expected decline per month.
    pub drift: f64,
    pub noise_sd: f64,
}

impl Default for MmseParams {
    fn default() -> Self {
        Self { m0: 29.0, drift: 9.5 / 108.0, noise_sd: 0.1 }
    }
}

/// MMSE score at the start of each month; `values[m]` drives month `m`.
/// Holds `months + 1` entries so that the last one is the end-of-horizon
/// score.
#[derive(Debug, Clone, PartialEq)]
pub struct MmseTrajectory {
    pub values: Vec<f64>,
}

impl MmseTrajectory {
    pub fn months(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn at_month(&self, m: usize) -> f64 {
        self.values[m.min(self.values.len() - 1)]
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("non-empty trajectory")
    }
}

/// Drift-plus-noise autoregression clipped to the score range.
pub fn simulate_mmse(seed: u64, months: usize, p: &MmseParams) -> Result<MmseTrajectory> {
    if months == 0 {
        return Err(Error::InvalidParameter("months must be at least 1".into()));
    }
    if !(0.0..=30.0).contains(&p.m0) {
        return Err(Error::InvalidParameter(format!("initial MMSE {} outside [0, 30]", p.m0)));
    }
    if !(p.noise_sd >= 0.0 && p.noise_sd.is_finite()) || !p.drift.is_finite() {
        return Err(Error::InvalidParameter("MMSE drift and noise must be finite, noise >= 0".into()));
    }
    let mut rng = substream(seed, Stream::Mmse, 0);
    let noise = Normal::new(0.0, p.noise_sd).expect("validated sd");
    let mut values = Vec::with_capacity(months + 1);
    let mut m = p.m0;
    values.push(m);
    for _ in 0..months {
        let eps = if p.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        m = (m - p.drift + eps).clamp(0.0, 30.0);
        values.push(m);
    }
    Ok(MmseTrajectory { values })
}
