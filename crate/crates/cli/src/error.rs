use thiserror::Error;

/// Harness failures grouped by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    /// Prefix the message with where the failure happened.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{ctx}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{ctx}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{ctx}: {m}")),
        }
    }
}

impl From<mfvi::Error> for CliError {
    fn from(e: mfvi::Error) -> Self {
        use mfvi::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidDimension { .. }
            | E::DimensionMismatch { .. }
            | E::InvalidPair(_)
            | E::IncompatibleBlocks(_)
            | E::InvalidConfiguration(_)
            | E::Json(_) => CliError::Config(msg),
            E::InvalidDataset(_) | E::Format { .. } | E::Io { .. } | E::Csv(_) => CliError::Data(msg),
            E::DegenerateMarginal { .. }
            | E::Evaluation { .. }
            | E::NonFinite(_)
            | E::UndefinedSum
            | E::Precondition(_) => CliError::Numerical(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}
