use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Error kinds raised by the core operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A consumer lacks one of the eight quarters needed to build a label.
    MissingHorizon {
        consumer_id: String,
        quarter: i32,
    },
    EmptyInput,
    /// Only one outcome class is present where both are required.
    DegenerateLabels,
    /// A rank correlation input is constant.
    ZeroVariance,
    InvalidConfig(String),
    LengthMismatch {
        expected: usize,
        got: usize,
    },
    /// Loss became non-finite while training the network.
    DivergenceDetected {
        epoch: usize,
    },
    InsufficientHistory {
        quarter: i32,
    },
    OutOfRange(String),
    DimTooLarge {
        dim: usize,
        limit: usize,
    },
    KeyMismatch(String),
    CollinearRegressors(String),
    EmptyAfterDrops,
    TooFewClusters {
        key: String,
        clusters: usize,
    },
    EmptyCellUnsupported(String),
    NegativeBalance,
    InvalidTerm,
    MissingRate(String),
    AllZeroLikelihood,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::MissingHorizon { consumer_id, quarter } => write!(
                f,
                "consumer {consumer_id} has no complete 8-quarter horizon at quarter {quarter}"
            ),
            Error::EmptyInput => write!(f, "empty input"),
            Error::DegenerateLabels => write!(f, "labels contain a single class"),
            Error::ZeroVariance => write!(f, "input has zero variance"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            Error::DivergenceDetected { epoch } => {
                write!(f, "training loss became non-finite in epoch {epoch}")
            }
            Error::InsufficientHistory { quarter } => {
                write!(f, "insufficient history to evaluate quarter {quarter}")
            }
            Error::OutOfRange(msg) => write!(f, "value out of range: {msg}"),
            Error::DimTooLarge { dim, limit } => {
                write!(f, "{dim} active features exceed the exact limit of {limit}")
            }
            Error::KeyMismatch(msg) => write!(f, "key mismatch: {msg}"),
            Error::CollinearRegressors(msg) => write!(f, "collinear regressors: {msg}"),
            Error::EmptyAfterDrops => write!(f, "no observations left after singleton drops"),
            Error::TooFewClusters { key, clusters } => {
                write!(f, "cluster key {key} has {clusters} cluster(s); need at least 2")
            }
            Error::EmptyCellUnsupported(msg) => write!(f, "unsupported composition cells: {msg}"),
            Error::NegativeBalance => write!(f, "balance must be non-negative"),
            Error::InvalidTerm => write!(f, "mortgage principal must be positive and term at least one month"),
            Error::MissingRate(msg) => write!(f, "missing rate: {msg}"),
            Error::AllZeroLikelihood => write!(f, "geography likelihood row is all zero"),
        }
    }
}

impl core::error::Error for Error {}
