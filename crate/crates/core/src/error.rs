use std::fmt;

/// Errors produced by the fingerprinting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no timestamp: snapshot contains no records")]
    EmptySnapshot,
    #[error("overlapping ranges {first} and {second}")]
    OverlappingRanges { first: IpRange, second: IpRange },
    #[error("range start {start} exceeds end {end}")]
    InvertedRange { start: u32, end: u32 },
    #[error("insufficient data for {entity}: {usable} usable points, need at least 2")]
    InsufficientData { entity: String, usable: usize },
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("degenerate signal: spectrum is identically zero")]
    DegenerateSignal,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("all singular values are zero")]
    ZeroEnergy,
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("baseline has no history")]
    EmptyBaseline,
    #[error("both classes must be present")]
    SingleClass,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    pub fn io(path: impl fmt::Display, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Inclusive IPv4 range used in overlap diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpRange {
    pub start: u32,
    pub end: u32,
    pub country: String,
}

impl fmt::Display for IpRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] {}", self.start, self.end, self.country)
    }
}
