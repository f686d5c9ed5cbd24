use std::path::PathBuf;

/// Process exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Usage = 2,
    Io = 3,
    Data = 4,
    Numerical = 5,
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Model(#[from] gcm_core::Error),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        use gcm_core::Error as E;
        match self {
            AppError::Usage(_) => ExitCode::Usage,
            AppError::Io { .. } => ExitCode::Io,
            AppError::Data(_) => ExitCode::Data,
            AppError::Model(e) => match e.root() {
                E::InvalidArgument(_) | E::TooManyPairs { .. } => ExitCode::Usage,
                E::DimensionMismatch { .. }
                | E::RankDeficientBasis { .. }
                | E::TooFewTimePoints { .. }
                | E::TooFewSubjects(_) => ExitCode::Data,
                _ => ExitCode::Numerical,
            },
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
