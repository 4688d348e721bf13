use std::fmt;
use std::path::PathBuf;

pub type LabResult<T> = std::result::Result<T, LabError>;

/// Harness-level failures: config problems, I/O, and propagated core errors.
#[derive(Debug)]
pub enum LabError {
    Config(String),
    Io { path: PathBuf, source: std::io::Error },
    Json(String),
    Core(dfw_core::Error),
    MissingRepresentation(PathBuf),
}

impl fmt::Display for LabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabError::Config(msg) => write!(f, "config error: {msg}"),
            LabError::Io { path, source } => write!(f, "io error at {}: {source}", path.display()),
            LabError::Json(msg) => write!(f, "json error: {msg}"),
            LabError::Core(e) => write!(f, "{e}"),
            LabError::MissingRepresentation(path) => {
                write!(f, "missing representation file {}", path.display())
            }
        }
    }
}

impl std::error::Error for LabError {}

impl From<dfw_core::Error> for LabError {
    fn from(e: dfw_core::Error) -> Self {
        LabError::Core(e)
    }
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }
}
