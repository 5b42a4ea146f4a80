use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("invalid structure table: {0}")]
    InvalidStructures(String),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("ill-conditioned pivot calibration (condition ratio {0:.3e})")]
    IllConditioned(f64),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("non-monotone time: {now} after {prev}")]
    NonMonotoneTime { prev: f64, now: f64 },
    #[error("malformed data: {0}")]
    Format(String),
    #[error("schema version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u16, found: u16 },
    #[error("runs are not comparable: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Short stable identifier, used for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidVolume(_) => "invalid_volume",
            Error::InvalidStructures(_) => "invalid_structures",
            Error::Degenerate(_) => "degenerate",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
            Error::Validation(_) => "validation",
            Error::NonMonotoneTime { .. } => "non_monotone_time",
            Error::Format(_) => "format",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::Mismatch(_) => "mismatch",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}

/// Attaches the offending path to an I/O error.
pub(crate) fn io_at(path: &std::path::Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}
