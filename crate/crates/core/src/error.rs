use thiserror::Error;

/// Errors produced by the simulation, estimation and optimization layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("particle count {0} outside supported range 1..={max}", max = crate::spin::MAX_PARTICLES)]
    Size(usize),

    #[error("operands live on different spin spaces (N = {left} vs N = {right})")]
    SpaceMismatch { left: usize, right: usize },

    #[error("invalid protocol: {0}")]
    InvalidSpec(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("mean spin has collapsed (|<S>| = {0:e}); squeezing parameter undefined")]
    UndefinedMetric(f64),

    #[error("search space has {space} dimensions but the template has {free} free times")]
    DimensionMismatch { space: usize, free: usize },

    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing upstream output: {0}")]
    MissingUpstream(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for the CLI: 2 for bad input or configuration,
    /// 3 for numeric failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) | Error::UndefinedMetric(_) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
