//! Smart-home ambient sensor simulator with injectable elderly-behaviour
//! anomalies, plus the preprocessing, detectors and interval metrics used
//! to evaluate detection on the simulated data.
//!
//! Numeric kernels (geometry, threshold detectors, sequence models) are
//! generic over [`num::Real`]; the aliases below fix them to `f64`.

pub mod anomalies;
pub mod config;
pub mod detectors;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod metrics;
pub mod num;
pub mod pipeline;
pub mod plan;
pub mod resident;
pub mod rng;
pub mod sensors;
pub mod simulator;
pub mod time;

pub use error::{Error, Result};

pub type Point = geometry::Point<f64>;
pub type Rect = geometry::Rect<f64>;
pub type SequenceModel = detectors::sequence::SequenceModel<f64>;
pub type ThresholdDetector = detectors::threshold::ThresholdDetector<f64>;
