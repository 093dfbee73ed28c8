use thiserror::Error;

use crate::time::Ticks;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown sensor id {0}")]
    UnknownSensor(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("event at tick {time} lies beyond the horizon of {horizon} s")]
    EventBeyondHorizon { time: Ticks, horizon: u64 },
    #[error("no positive labels in training data for {0}; skip this detector")]
    NoPositives(String),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("dimension mismatch: model expects {expected} sensors, data has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label tracks differ: {0}")]
    TrackMismatch(String),
    #[error("unsupported anomaly/method pairing {anomaly}/{method}; valid pairings: {valid}")]
    UnsupportedPairing { anomaly: String, method: String, valid: String },
    #[error("malformed model file: {0}")]
    Model(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
