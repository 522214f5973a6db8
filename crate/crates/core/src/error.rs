use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rejection sampling exceeded {cap} draws for particle {index}; initial data spec is degenerate")]
    DegenerateSpec { index: usize, cap: u64 },

    #[error("particles {i} and {j} coincide with zero softening")]
    SingularConfiguration { i: usize, j: usize },

    #[error("particle {index} at {position:?} lies outside the grid box (half width {half_width}) at t = {time}")]
    OutOfBox {
        index: usize,
        position: [f64; 3],
        half_width: f64,
        time: f64,
    },

    #[error("non-finite state for particle {index} in RK stage {stage} at t = {time}")]
    NonFinite {
        index: usize,
        stage: usize,
        time: f64,
    },

    #[error("step size underflow at t = {time} (h = {h:e}); near-singular encounter")]
    StepUnderflow { time: f64, h: f64 },

    #[error("nonpositive value {value} at index {index} (t = {time}); log undefined")]
    NonPositive { index: usize, time: f64, value: f64 },

    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("sample spacing is not uniform at index {index}")]
    NonUniformSpacing { index: usize },

    #[error("missing series column `{0}`")]
    MissingColumn(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("run mismatch: {0}")]
    Mismatch(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical integration itself (as opposed to
    /// bad input), which the CLI reports with exit code 2.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularConfiguration { .. }
                | Error::NonFinite { .. }
                | Error::StepUnderflow { .. }
                | Error::OutOfBox { .. }
        )
    }
}
