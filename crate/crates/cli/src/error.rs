use std::io;
use std::process::ExitCode;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {context}: {source}")]
    Io { context: String, source: io::Error },

    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: lcs_core::Error },

    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    /// Process exit code: 2 config, 3 I/O or corrupt files, 4 numerical.
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Invalid(_) => 4,
            CliError::Stage { source, .. } => match source {
                lcs_core::Error::Config(_) => 2,
                lcs_core::Error::Io(_) | lcs_core::Error::Format(_) => 3,
                lcs_core::Error::Margin { .. } | lcs_core::Error::Numerical(_) => 4,
            },
        })
    }
}

/// Attaches a stage name to core errors.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for lcs_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
