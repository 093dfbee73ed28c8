//! Detector families and prediction post-processing.

pub mod cart;
pub mod denoise;
pub mod forest;
pub mod model_io;
pub mod sequence;
pub mod threshold;

pub use cart::{Binned, Tree, TreeParams};
pub use denoise::denoise;
pub use forest::{fit_forest, ForestModel, ForestParams};
pub use sequence::{fit_sequence, Decoding, SequenceModel, Variant};
pub use threshold::{detect_weeksscale, fit_threshold, Direction, ThresholdDetector};
