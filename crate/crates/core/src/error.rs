use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("event budget exceeded: about {requested} events requested, budget is {budget}")]
    Capacity { requested: u64, budget: u64 },

    #[error("timestamps not sorted at index {index}")]
    Unsorted { index: usize },

    #[error("timestamp overflow while shifting by {delay_ps} ps")]
    TimestampOverflow { delay_ps: u64 },

    #[error("{path}: bad magic bytes, not a timestamp file")]
    BadMagic { path: PathBuf },

    #[error("{path}: unsupported format version {version}")]
    UnsupportedVersion { path: PathBuf, version: u16 },

    #[error("{path}: truncated file, header promises {expected} records but only {found} present")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("{path}: {extra} trailing bytes after the last record")]
    TrailingData { path: PathBuf, extra: usize },

    #[error("{path}: timestamp decreases at record {record}")]
    NonMonotone { path: PathBuf, record: u64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no correlation found (significance {score:.2} below threshold {threshold})")]
    NoCorrelation { score: f64, threshold: f64 },

    #[error("sinusoid fit is rank deficient: angles do not resolve a full period")]
    RankDeficient,

    #[error("visibility undefined when both extrema are zero")]
    UndefinedVisibility,

    #[error("accidental rate {accidental} exceeds the fitted maximum {c_max}")]
    DegenerateCorrection { accidental: f64, c_max: f64 },

    #[error("coincidence rate {coincidences} exceeds sqrt(S1*S2) = {bound}")]
    InconsistentHeralding { coincidences: f64, bound: f64 },

    #[error("measured width {measured} is narrower than the resolution {resolution}")]
    NonPhysicalDeconvolution { measured: f64, resolution: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
