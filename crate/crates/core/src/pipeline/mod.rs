//! Raw events to data matrix, label tracks and detector features.

pub mod daily;
pub mod forgetting;
pub mod io;
pub mod labels;
pub mod matrix;
pub mod nrd;

pub use daily::{estimate_outings, estimate_sleep, DailySeries};
pub use forgetting::{forgetting_features, ForgettingFeatures};
pub use labels::{summarize_labels, IntervalSet, LabelTrack};
pub use matrix::{binarize, Columns, DataMatrix, SensorSet};
pub use nrd::{nonresponse_duration, NrdMatrix, NRD_CAP};

/// Sensor sets are 128-bit masks.
pub const MAX_SENSORS: usize = 128;
