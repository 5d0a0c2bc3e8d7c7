use radial_dichotomy::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Core(#[from] radial_dichotomy::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    Threads(String),

    #[error("{failed} of {total} verification checks failed")]
    Verification { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Parse { .. } | Self::Validation(_) | Self::Threads(_) => 2,
            Self::Core(e) => match e.class() {
                ErrorClass::Input => 2,
                ErrorClass::Dichotomy => 3,
                ErrorClass::Solver => 4,
                ErrorClass::Io => 5,
            },
            Self::Verification { .. } => 1,
            Self::Io { .. } | Self::Csv(_) => 5,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
