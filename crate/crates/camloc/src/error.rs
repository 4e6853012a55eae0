//! Application errors with stable codes for the CLI and the service.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// The document does not match the schema; `path` is the offending field.
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    /// The document parsed but a domain invariant failed.
    #[error("invariant violated: {name}")]
    Invariant { name: String },
    #[error("invalid request: {message}")]
    Usage { message: String, field_path: Option<String> },
    /// An estimator failed.
    #[error("{0}")]
    Estimation(camloc_core::Error),
    /// A pipeline result was produced but without absolute candidates.
    #[error("no absolute candidates: {0}")]
    NoCandidates(String),
    /// Any other error, attributed to an input file.
    #[error("{}: {source}", path.display())]
    InFile { path: PathBuf, source: Box<AppError> },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn usage(message: impl Into<String>) -> Self {
        AppError::Usage {
            message: message.into(),
            field_path: None,
        }
    }

    pub fn missing(field: &str) -> Self {
        AppError::Usage {
            message: format!("`{field}` is required"),
            field_path: Some(field.into()),
        }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        AppError::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            AppError::Schema { .. } => "schema_violation",
            AppError::Invariant { .. } => "invariant_violation",
            AppError::Usage { .. } => "invalid_request",
            AppError::Estimation(_) => "estimation_failed",
            AppError::NoCandidates(_) => "no_candidates",
            AppError::Io { .. } => "io_error",
            AppError::InFile { source, .. } => source.code(),
        }
    }

    /// Process exit code; stable across releases.
    ///
    /// | code | meaning |
    /// |------|---------|
    /// | 0 | result produced |
    /// | 2 | bad command line or request |
    /// | 3 | input document invalid (schema or invariant) |
    /// | 4 | estimation failed |
    /// | 5 | no absolute candidates |
    /// | 6 | file or network I/O |
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage { .. } => 2,
            AppError::Schema { .. } | AppError::Invariant { .. } => 3,
            AppError::Estimation(_) => 4,
            AppError::NoCandidates(_) => 5,
            AppError::Io { .. } => 6,
            AppError::InFile { source, .. } => source.exit_code(),
        }
    }

    pub fn field_path(&self) -> Option<&str> {
        match self {
            AppError::Schema { path, .. } => Some(path),
            AppError::Invariant { name } => Some(name),
            AppError::Usage { field_path, .. } => field_path.as_deref(),
            AppError::InFile { source, .. } => source.field_path(),
            _ => None,
        }
    }
}

impl From<camloc_core::Error> for AppError {
    fn from(e: camloc_core::Error) -> Self {
        match e {
            camloc_core::Error::InvariantViolation(name) => AppError::Invariant { name },
            e => AppError::Estimation(e),
        }
    }
}
