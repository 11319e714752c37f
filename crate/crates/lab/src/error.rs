use std::path::PathBuf;

use vflip_core::Error as CoreError;

/// Failures of a run, partitioned by exit status.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Schema violations and unusable parameters, with a field path.
    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// A physical constraint was violated, either by the input or along the
    /// computation.
    #[error("physical constraint violated: {0}")]
    Physics(String),

    /// The run finished but a requested check did not pass.
    #[error("check failed: {0}")]
    Check(String),
}

impl LabError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Io { .. } => 2,
            Self::Physics(_) => 3,
            Self::Check(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefixes a core error with the config field it came from.
    pub fn at(path: &str, e: CoreError) -> Self {
        match Self::from(e) {
            Self::Config(m) => Self::Config(format!("{path}: {m}")),
            Self::Physics(m) => Self::Physics(format!("{path}: {m}")),
            other => other,
        }
    }
}

impl From<CoreError> for LabError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonPositiveBeta(_)
            | CoreError::OutsidePhysicalRegion { .. }
            | CoreError::PhysicalRegionExit { .. }
            | CoreError::NotAdmissible(_)
            | CoreError::IndefinitePrecision(_) => Self::Physics(e.to_string()),
            CoreError::BelowNoiseFloor { .. } => {
                Self::Check(format!("{e}; increase plan.ensemble"))
            }
            _ => Self::Config(e.to_string()),
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
