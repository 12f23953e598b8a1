use core::fmt;

/// Errors surfaced by library operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidArgument(&'static str),
    /// A configuration value violated a documented precondition.
    InvalidConfig(&'static str),
    /// Vector length disagrees with the expected dimension.
    DimensionMismatch { expected: usize, actual: usize },
    /// A feature vector contained NaN.
    InvalidFeature,
    /// A density estimator was queried before its first refresh.
    EmptyEstimator,
    /// The sampling distribution lost positive definiteness; the caller
    /// should re-initialize the optimizer.
    RestartRequired,
    /// A metric is undefined for the given archive state.
    UndefinedMetric(&'static str),
    /// The requested export does not apply to this archive shape.
    UnsupportedExport(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
            Error::InvalidConfig(what) => write!(f, "invalid config: {what}"),
            Error::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {expected}, got {actual}")
            }
            Error::InvalidFeature => write!(f, "feature vector contains NaN"),
            Error::EmptyEstimator => {
                write!(f, "density estimator queried before first refresh")
            }
            Error::RestartRequired => {
                write!(f, "sampling distribution degenerated; restart required")
            }
            Error::UndefinedMetric(what) => write!(f, "undefined metric: {what}"),
            Error::UnsupportedExport(what) => write!(f, "unsupported export: {what}"),
        }
    }
}

impl core::error::Error for Error {}

/// Library-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
