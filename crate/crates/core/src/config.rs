//! TOML run configuration.
//!
//! ```toml
//! seed = 1
//! horizon_days = 3240
//! speed_cm_s = 68.75
//! # layout_file = "layout.toml"       # [plan] and [layout] tables
//! # templates_file = "templates.toml" # [[templates]] array
//! output_dir = "run"
//!
//! [anomalies]
//! rate_scale = 1.0
//! wandering = true
//!
//! [mmse]
//! m0 = 29.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{FloorPlan, SensorLayout};
use crate::resident::activity::ActivityTemplate;
use crate::resident::mmse::MmseParams;
use crate::resident::walk::DEFAULT_SPEED_CM_S;
use crate::simulator::{AnomalySettings, SimConfig};

pub const DEFAULT_HORIZON_DAYS: u64 = 9 * 360;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub horizon_days: u64,
    pub speed_cm_s: f64,
    pub layout_file: Option<PathBuf>,
    pub templates_file: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub anomalies: AnomalySettings,
    pub mmse: MmseParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            horizon_days: DEFAULT_HORIZON_DAYS,
            speed_cm_s: DEFAULT_SPEED_CM_S,
            layout_file: None,
            templates_file: None,
            output_dir: None,
            anomalies: AnomalySettings::default(),
            mmse: MmseParams::default(),
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
pub struct LayoutFile {
    pub plan: FloorPlan,
    pub layout: SensorLayout,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct TemplatesFile {
    pub templates: Vec<ActivityTemplate>,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_toml(path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// Resolves referenced files relative to `base` and validates the
    /// result; every problem found is reported in one error.
    pub fn to_sim_config(&self, base: &Path) -> Result<SimConfig> {
        let mut cfg = SimConfig::default_with(self.seed, self.horizon_days);
        cfg.speed_cm_s = self.speed_cm_s;
        cfg.anomalies = self.anomalies.clone();
        cfg.mmse = self.mmse;
        if let Some(p) = &self.layout_file {
            let l: LayoutFile = read_toml(&base.join(p))?;
            cfg.plan = l.plan;
            cfg.layout = l.layout;
        }
        if let Some(p) = &self.templates_file {
            let t: TemplatesFile = read_toml(&base.join(p))?;
            cfg.templates = t.templates;
        }
        let problems = cfg.problems();
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        Ok(cfg)
    }
}
