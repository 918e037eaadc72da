use std::fmt;
use std::process::ExitCode;
use thc_core::data::DataError;
use thc_core::experiment::ExperimentError;
use thc_core::net::checkpoint::CheckpointError;
use thc_core::net::NetError;

/// Failure of a command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or an invalid configuration (exit 2).
    Usage(String),
    /// Missing, unreadable or corrupt files (exit 3).
    Io(String),
    /// Training diverged (exit 4).
    NonFinite { epoch: usize },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::NonFinite { .. } => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::NonFinite { epoch } => write!(f, "non-finite loss in epoch {epoch}"),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

pub fn io(msg: impl fmt::Display) -> CliError {
    CliError::Io(msg.to_string())
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        io(e)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidConfig(_) | DataError::InsufficientData { .. } => usage(e),
            _ => io(e),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::NonFiniteLoss { epoch } => CliError::NonFinite { epoch },
            NetError::Entropy(_) => CliError::NonFinite { epoch: 0 },
            _ => usage(e),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Net(e) => e.into(),
            ExperimentError::Data(e) => e.into(),
            ExperimentError::Corrupt(_) => io(e),
            _ => usage(e),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        io(e)
    }
}
