use thiserror::Error;

/// Errors raised by the safety filter and its simulator.
#[derive(Debug, Error, Clone, PartialEq)]
#[non_exhaustive]
pub enum Error {
    #[error("dimension mismatch: expected {expected} joints, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid limits: {0}")]
    InvalidLimits(String),
    #[error("execution steps h = {h} outside 1..={chunk_len}")]
    ExecStepsOutOfRange { h: usize, chunk_len: usize },
    #[error("goal list is empty")]
    NoGoals,
    #[error("end of recording")]
    EndOfRecording,
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("degenerate path: all waypoints coincide")]
    DegeneratePath,
    #[error("path leaves joint limits after subdivision")]
    PathOutsideLimits,
    #[error("interval [{t_a}, {t_b}] starts before measurement time {meas_time}")]
    IntervalBeforeMeasurement { t_a: f64, t_b: f64, meas_time: f64 },
    #[error("handoff rejected: {0}")]
    HandoffRejected(String),
    #[error("obstacle {obstacle} left its declared bounds at t = {time}: {reason}")]
    InadmissibleObstacle { obstacle: usize, time: f64, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
