use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Io(String),

    /// One or more checks failed.
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    /// Process exit code: 1 for failed validation, 2 for anything the user
    /// has to fix in the configuration or environment.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<tbs_noma_core::Error> for CliError {
    fn from(e: tbs_noma_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
