use thiserror::Error;

use crate::section::{Side, TransitionKind};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("no {0:?} samples to estimate a fixed point from")]
    EmptyLabelClass(Side),

    #[error("labels do not alternate at event index {index} (two consecutive {label:?} events)")]
    LabelAlternation { index: usize, label: Side },

    #[error("event times are not strictly increasing at index {index}")]
    NonMonotonicTime { index: usize },

    #[error("no complete {0} pair in the section sequence")]
    InsufficientPairs(TransitionKind),

    #[error("invalid mirror spec: {0}")]
    InvalidMirror(String),

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("series too short: need more than {needed} samples, have {found}")]
    SeriesTooShort { needed: usize, found: usize },

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("no events detected")]
    NoEvents,

    #[error("event at t = {time} s lies outside the interpolable range [{lo}, {hi}]")]
    EventOutOfRange { time: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("validation outputs have zero norm; CVE is undefined")]
    ZeroNormalization,

    #[error("normal and mirrored datasets differ in size ({normal} vs {mirrored})")]
    SizeMismatch { normal: usize, mirrored: usize },

    #[error("need at least 2 maps for a sample variance, got {0}")]
    TooFewMaps(usize),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("all differences zero")]
    AllDifferencesZero,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("unstable model: stride-map spectral radius {0} >= 1")]
    UnstableModel(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Failures caused by the numbers rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::ZeroNormalization)
    }
}
