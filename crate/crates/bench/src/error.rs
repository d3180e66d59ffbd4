use std::path::PathBuf;

use simba_core::SimbaError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config parse error in {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trace error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] SimbaError),
    #[error("contraction violated: {0}")]
    Violation(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    /// 0 success, 1 other failure, 2 config, 3 I/O, 4 contraction violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::ConfigParse { .. } => 2,
            BenchError::Io { .. } | BenchError::Csv(_) => 3,
            BenchError::Violation(_) => 4,
            BenchError::Core(e) => match e {
                SimbaError::Io(_) | SimbaError::Parse { .. } => 3,
                SimbaError::InvalidParameter(_) | SimbaError::UnknownOptimizer(_) | SimbaError::Unsupported(_) => 2,
                SimbaError::InvalidInput(_) | SimbaError::NumericalConsistency(_) => 1,
            },
        }
    }
}
